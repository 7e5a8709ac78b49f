"""GA-отбор генов + MLP для данных экспрессии (tumor/normal)."""

__version__ = "0.1.0"
