"""
Probe features from converted instances.

Images contribute their pixels scaled to ``[0, 1]``, optionally block-averaged;
texts contribute their integers divided by the amplification factor.
"""
from typing import Sequence

import numpy as np

from sigadapt.errors import ValidationError
from sigadapt.image import PixelImage
from sigadapt.probe import FeatureBatch
from sigadapt.text import TokenText
from sigadapt.types import Converted, FloatArray


def pool_pixels(image: PixelImage, block: int) -> FloatArray:
    """
    Mean of every ``block x block`` tile of each plane, pixels scaled to ``[0, 1]``.

    .. code-block:: python3

        >>> from sigadapt.image import NormRecord, Scheme
        >>> img = PixelImage(np.full((3, 4, 4), 255), NormRecord(0, 1), "x", Scheme.A, (4, 4), "")
        >>> pool_pixels(img, 2).shape
        (12,)
    """
    if block < 1:
        raise ValidationError(f"pooling block must be positive, not {block}")
    if block == 1:
        return image.features()
    h, w = image.height, image.width
    if h % block or w % block:
        raise ValidationError(f"{h}x{w} image does not tile into {block}x{block} blocks")
    planes = image.pixels.astype(np.float64).reshape(3, h // block, block, w // block, block)
    out: FloatArray = planes.mean(axis=(2, 4)).ravel() / 255.0
    return out


def image_features(images: Sequence[PixelImage], pool: int = 1) -> FloatArray:
    if not images:
        raise ValidationError("no images to featurize")
    rows = [pool_pixels(img, pool) for img in images]
    return _stack(rows)


def text_features(texts: Sequence[TokenText]) -> FloatArray:
    if not texts:
        raise ValidationError("no texts to featurize")
    return _stack([t.features() for t in texts])


def _stack(rows: Sequence[FloatArray]) -> FloatArray:
    widths = {r.size for r in rows}
    if len(widths) > 1:
        raise ValidationError(f"converted instances disagree on feature width: {sorted(widths)}")
    return np.stack(rows)


def feature_batch(items: Sequence[Converted], labels: Sequence[int], pool: int = 1) -> FeatureBatch:
    """
    A :class:`~sigadapt.probe.FeatureBatch` of converted instances of one kind.
    """
    if not items:
        raise ValidationError("no converted instances")
    if all(isinstance(i, PixelImage) for i in items):
        features = image_features([i for i in items if isinstance(i, PixelImage)], pool)
    elif all(isinstance(i, TokenText) for i in items):
        features = text_features([i for i in items if isinstance(i, TokenText)])
    else:
        features = _stack([i.features() for i in items])
    return FeatureBatch(features, labels)
