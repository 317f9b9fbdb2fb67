"""Multi-path angle-of-arrival estimation for microphone arrays."""

from .algorithm import (
    IterationResult,
    SubAoaConfig,
    SubAoaOutput,
    aoa_likelihood,
    projection_attenuation,
    run,
)
from .baselines import PeakSet, Spectrum, delay_and_sum, gcc_phat, music, peak_pick
from .estimators import MUSIC, DelayAndSum, GccPhat, SubAoA
from .frontend import (
    FrequencyBand,
    MultichannelRecording,
    SnapshotTensor,
    StftConfig,
    StftTransformer,
    load_wav,
    sample_covariance,
    save_wav,
    select_band,
    stft,
)
from .geometry import (
    AngleGrid,
    MicArray,
    SteeringMatrix,
    SteeringVector,
    circular_array,
    load_array,
    steering_matrix,
    steering_vector,
    uniform_linear_array,
)
from .linalg import hermitian_eig, noise_subspace, null_space_of_vector, project
from .metrics import ResultRecord, circular_error, match_and_score
from .simulate import (
    PathSpec,
    Room,
    Scenario,
    chirp_ground_truth,
    image_source_paths,
    linear_chirp,
    speech_like_source,
    synthesize,
)

__version__ = "0.1.0"
