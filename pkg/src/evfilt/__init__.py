"""Event-camera noise filtering toolkit.

Interpolation filters over subarea state (distance-weighted and
bilinear), a bit-accurate model of their FPGA datapath with a
cycle-level pipeline simulator, nearest-neighbour and spatiotemporal
baselines, a labeled Bernoulli noise generator, and a threshold-swept
AUROC/AUPRC evaluation harness. Ships with the ``evfilt`` CLI.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    CoordinateError,
    DomainError,
    EvfiltError,
    FormatError,
    GeometryMismatchError,
    InternalError,
    LabelError,
    TimestampOrderError,
)
from .events import (  # noqa: F401
    Event,
    EventStream,
    merge_streams,
    read_events,
    relabel_noise,
    write_events,
)
from .noise import NoiseConfig, generate_noise  # noqa: F401
from .core import (  # noqa: F401
    AreaGrid,
    DecisionTrace,
    FilterConfig,
    NeighborContext,
    ScoredEvent,
    ScoredStream,
    bif_decide_division_free,
    bif_score,
    dif_decide_division_free,
    dif_score,
    filter_stream,
    global_update,
    neighbor_context,
    update_area,
)
from .hw import (  # noqa: F401
    HwParams,
    PipelineStats,
    distance_lut,
    hw_decide,
    hw_filter_stream,
    hw_k,
    hw_update_area,
    pipeline_simulate,
    pipeline_stats,
    quantize_distance,
    throughput_report,
    wrap_signed,
)
from .baselines import PixelTimestampMap, nnb_filter, stcf_filter  # noqa: F401
from .metrics import (  # noqa: F401
    PrCurve,
    RocCurve,
    auprc_from_scores,
    roc_from_scores,
    sparsity,
    stability,
)
