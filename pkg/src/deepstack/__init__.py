"""Deep belief networks, stacked (denoising) autoencoders and the tools to train them."""
from .data import Dataset
from .estimators import AutoencoderTransformer, DeepClassifier, RBMTransformer
from .exceptions import DeepStackError

__all__ = ["AutoencoderTransformer", "Dataset", "DeepClassifier", "DeepStackError", "RBMTransformer"]
__version__ = "0.1.0"
