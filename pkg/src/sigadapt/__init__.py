from sigadapt.errors import (  # noqa: F401
    AdapterMismatchError,
    ArtifactError,
    NumericError,
    OverflowRejectedError,
    SigAdaptError,
    ValidationError,
)
from sigadapt.image import (  # noqa: F401
    ImageAdapterConfig,
    PixelImage,
    RgbStack,
    convert_to_image,
)
from sigadapt.probe import ProbeHead, TrainConfig, evaluate, train  # noqa: F401
from sigadapt.signal import Dataset, SignalMatrix  # noqa: F401
from sigadapt.split import Partition, SplitManifest, split_dataset  # noqa: F401
from sigadapt.text import TextAdapterConfig, TokenText, convert_to_text  # noqa: F401
from sigadapt.version import __version__  # noqa: F401
