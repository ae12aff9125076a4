try:
    from importlib.metadata import version

    __version__ = version("wearclass")
except Exception:  # pragma: no cover # pylint: disable=broad-exception-caught
    try:
        from ._version import __version__
    except ImportError:
        __version__ = '0.0.0'

from .errors import *
from .imgcore import *
from .shapefeat import *
from .borchiz import *
from .preprocess import *
from .config import *
from .imageio_utils import *
from .dataset import *
from .classify import *
from .fusion import *
from .pipelines import *
from ._pipeline_svm import *
from ._pipeline_late import *
from ._pipeline_cotrans import *
from .evaluation import *
from .synth import *
