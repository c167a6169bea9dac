from abc import abstractmethod
from typing import Optional, Protocol, runtime_checkable

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]
PixelArray = npt.NDArray[np.uint8]


@runtime_checkable
class Converted(Protocol):
    """
    An instance rendered by one of the adapters.

    Both :class:`~sigadapt.image.PixelImage` and :class:`~sigadapt.text.TokenText` implement this protocol,
    which is all the probe needs to turn converted artifacts into feature rows.
    """

    @property
    @abstractmethod
    def instance_id(self) -> str:
        """Identifier of the source :class:`~sigadapt.signal.SignalMatrix`"""

    @property
    @abstractmethod
    def label(self) -> Optional[int]:
        """Class index of the source instance, when known"""

    @abstractmethod
    def features(self) -> FloatArray:
        """Flat real feature vector of the converted representation"""
