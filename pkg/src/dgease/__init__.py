"""Interior-penalty discontinuous Galerkin on agglomerated and curved elements."""
__version__ = "0.1.0"
