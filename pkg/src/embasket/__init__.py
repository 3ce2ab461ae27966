"""EM corporate credit as a modified first-to-default basket of two jump-diffusions."""
from __future__ import annotations

__version__ = "0.1.0"
