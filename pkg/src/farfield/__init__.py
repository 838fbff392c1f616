"""Feature-domain enhancement and domain adaptation for far-field speaker verification."""

from .archive import read_feature_archive, write_feature_archive
from .config import PRESETS, Preset, get_preset, load_config
from .corpus import (
    CorpusManifest,
    PairedManifest,
    RIRSpec,
    UtteranceRecord,
    apply_rir,
    build_parallel_corpus,
    concat_same_source,
    draw_unpaired_batches,
    filter_by_snr,
    mix_noise_at_snr,
    synth_rir,
    wada_snr,
)
from .features import (
    FeatureMatrix,
    FrameConfig,
    FrameMask,
    MelConfig,
    VadConfig,
    Waveform,
    energy_vad,
    log_mel,
    mfcc_from_logmel,
    short_time_mean_center,
    stft,
)
from .losses import (
    LossWeights,
    loss_adv_gen,
    loss_cycle,
    loss_cyclegan_gen,
    loss_disc,
    loss_fm,
    loss_sen,
)
from .models import (
    DiscriminatorConfig,
    FeatureGenerator,
    GeneratorConfig,
    PatchDiscriminator,
    discriminator_forward,
    discriminator_map_shape,
    generator_forward,
    init_parameters,
)
from .sveval import (
    DcfParams,
    Segment,
    TdnnEmbedder,
    Trial,
    build_enrollments,
    build_test_chunks,
    build_trials,
    compose_svs_corpus,
    compute_eer,
    compute_min_dcf,
    embed,
    score_cosine,
)
from .training import (
    TrainSchedule,
    enhance_features,
    epoch_batches,
    lr_at,
    train_cyclegan,
    train_sen,
)

__version__ = "0.1.0"
