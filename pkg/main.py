"""Стартовый файл, просто запускает CLI."""

from geneselect_hub.cli.interface import main

if __name__ == "__main__":
    raise SystemExit(main())
