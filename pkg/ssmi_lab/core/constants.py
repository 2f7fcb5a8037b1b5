"""Constants and defaults table for ssmi-lab."""

# Log files
DEFAULT_LOG_FILE = "runs/ssmi-lab.log"
DEFAULT_TRAINING_LOG = "runs/train.tsv"
DEFAULT_CHECKPOINT = "runs/model.ssmi"
DEFAULT_REPORT = "runs/report.txt"

# Checkpoint container
CHECKPOINT_MAGIC = b"SSMI"
CHECKPOINT_VERSION = 1
REPORT_HEADER = "# ssmi-lab report v1"

# Model defaults
DEFAULT_LAYERS = 1
DEFAULT_WIDTH = 32
DEFAULT_HEADS = 2
DEFAULT_STATE_SIZE = 8
DEFAULT_VOCAB = 4
DEFAULT_VISUAL_WIDTH = 16
DEFAULT_RAW_WIDTH = 8
DEFAULT_MAX_T = 8
FFN_EXPANSION = 4

# Initialization
SSM_INIT_SCALE = 0.9
SSM_INIT_STD = 0.02
BACKBONE_PROJ_STD = 0.02
EMBEDDING_STD = 1.0
CAUSAL_MASK_VALUE = -1e30

# Stability enforcement
POWER_ITERATIONS = 50
STABILITY_LIMIT = 0.999
STABILITY_RESCALE = 0.99
RESOLVENT_TOLERANCE = 1e-12

# Training defaults
DEFAULT_LAMBDA = 0.5
DEFAULT_LR = 1e-3
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPS = 1e-8
DEFAULT_GRAD_CLIP = 1.0
DEFAULT_STEPS = 100
DEFAULT_BATCH_SIZE = 8
DEFAULT_LOG_EVERY = 10
DEFAULT_SEED = 0

# Data defaults
DEFAULT_DATASET_SIZE = 400
DEFAULT_CAPTION_LENGTH = 6
TRAIN_FRACTION = 0.9

# Evaluation defaults
DEFAULT_SIGMAS = (0.0, 0.5, 1.0, 10.0)
DEFAULT_EVAL_SEEDS = (0,)
DEFAULT_BLEU_ORDER = 4
REFERENCE_TRAINABLE_RATIO = 0.005  # SSM-only fine-tuning figure of merit

# Finite-difference gradient checks
GRADCHECK_STEP = 1e-5
GRADCHECK_TOLERANCE = 1e-4
