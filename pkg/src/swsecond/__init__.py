"""Second-order Slepian-Wolf rate regions and finite-blocklength oracles."""
__version__ = "0.1.0"
