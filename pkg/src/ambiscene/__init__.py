"""Spatial sound-scene synthesis and class-aware separation scoring.

The toolkit renders first-order Ambisonics (AmbiX) mixture clips from dry
events, measured room impulse responses and noise beds, and scores
separation systems with the class-aware SDR-improvement metric over a
rendered corpus.
"""

from .manifest import Manifest, RirRecord, SourceRecord, load_manifest, validate_manifest
from .metrics import (
    ClipEstimate,
    ClipReference,
    ClipScore,
    DetectionReport,
    MetricConfig,
    detection_report,
    ranking_score,
    score_clip,
    sdri,
)
from .render import (
    CorpusSummary,
    RenderConfig,
    RenderedScene,
    RenderError,
    render_corpus,
    render_scene,
)
from .rir import DirectPathIr, Rir, RirBank, extract_direct_path, select_rir
from .sampler import (
    EventPlacement,
    SamplerConfig,
    SceneSamplingError,
    SceneSpec,
    SourcePool,
    sample_scene,
    scene_seed,
    validate_scene,
)
from .signal import (
    TOOLKIT_SAMPLE_RATE,
    FoaClip,
    MonoClip,
    convolve,
    convolve_mono,
    gain_for_snr,
    rms,
    sdr,
)
from .vocab import TARGET_CLASSES
from .wavio import WavFormatError, WavInfo, probe_wav, read_wav, write_wav

__version__ = "0.1.0"
