"""Multi-task face inpainting.

Fills a masked face region while jointly predicting 68 facial landmarks.
The two prediction heads share an encoder and exchange information through
an adaptive fusion scalar and a rasterized landmark feedback map.
"""

__version__ = "0.1.0"

from inclg.estimator import MultiTaskInpainter
from inclg.networks import MultiTaskGenerator, PatchDiscriminator, composite

__all__ = [
    "MultiTaskInpainter",
    "MultiTaskGenerator",
    "PatchDiscriminator",
    "composite",
    "__version__",
]
