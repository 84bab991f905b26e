"""Multiple-quantum coherence signals of dipole-coupled atomic vapors."""

__version__ = "0.1.0"
