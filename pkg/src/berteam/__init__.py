"""BERTeam: selecting teams from a population with a masked-language-model transformer.

Subpackages and modules:

* ``nn``           reverse-mode autodiff, layers, Adam, finite-difference checks
* ``model``        the encoder-decoder team model and its generation procedure
* ``replay``       inverse-probability-weighted training buffer
* ``elo``          online Elo updates and Bradley-Terry fits
* ``coevolution``  population epochs and the generation update
* ``games``        GridCTF, scripted policies, the matrix fixture
* ``rl``           REINFORCE learners
* ``baselines``    MCAA mainland selection and adapted MAP-Elites
* ``nash``         fictitious play over coach games
* ``experiments``  experiment pipelines; ``cli`` wraps them
"""

from .model import BERTeam, ContractError, GenerationPolicy, MaskedExample

__all__ = ["BERTeam", "ContractError", "GenerationPolicy", "MaskedExample"]
__version__ = "0.1.0"
