# src/config.py
import os

# --- Application ---
VERSION = "2.0.0"
APP_NAME = "ALiBi Embedding Lab"

# --- Directory Paths ---
ROOT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
OUTPUT_DIR = os.path.join(ROOT_DIR, 'outputs')
LOG_DIR = os.environ.get('ALIBI_LOG_DIR', 'logs')
LOG_LEVEL = os.environ.get('ALIBI_LOG_LEVEL', 'INFO')

# --- Environment ---
NUM_THREADS_ENV = 'ALIBI_NUM_THREADS'

# --- Tokenizer ---
PAD_TOKEN = '[PAD]'
UNK_TOKEN = '[UNK]'
CLS_TOKEN = '[CLS]'
SEP_TOKEN = '[SEP]'
MASK_TOKEN = '[MASK]'
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN, MASK_TOKEN)
CONTINUATION_PREFIX = '##'
SPECIAL_WORD_ID = -1  # word_id carried by [CLS], [SEP] and [PAD]
MAX_CHARS_PER_WORD = 100
DEFAULT_VOCAB_SIZE = 30522

# --- Architecture ---
HEAD_DIM = 64
LAYER_NORM_EPS = 1e-12
INIT_STD = 0.02
MASK_PENALTY = -1e9  # finite stand-in for -inf in attention scores

# --- Masked language modeling ---
MLM_MASK_RATE = 0.30
MLM_MASK_TOKEN_PROB = 0.8
MLM_RANDOM_TOKEN_PROB = 0.1
IGNORE_INDEX = -100
TRAIN_SEQ_LEN = 512
EVAL_SEED = 1234

# --- Contrastive fine-tuning ---
TEMPERATURE = 0.05
NUM_HARD_NEGATIVES = 15

# --- Evaluation ---
NDCG_CUTOFF = 10
RETRIEVAL_CUTOFFS = (1, 3, 5, 10, 100)
KMEANS_BATCH_SIZE = 32
KMEANS_EPOCHS = 100

# --- Binary formats ---
CHECKPOINT_MAGIC = b'JBRT'
CHECKPOINT_VERSION = 1
EMBEDDING_MAGIC = b'JEV2'
EMBEDDING_VERSION = 2
