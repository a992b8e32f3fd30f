# scripts/embed.py
import os
import sys

project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.append(project_root)

from src.data_pipeline.embedding_store import save_embeddings, save_embeddings_jsonl
from src.data_pipeline.loader import load_jsonl
from src.data_pipeline.schemas import CorpusRecord
from src.data_pipeline.tokenizer import load_vocab
from src.logger import logger
from src.model.embedder import encode
from train.checkpoint import load_encoder

EMBED_FORMATS = ("bin", "jsonl")


def run_embed(args) -> dict:
    """Encodes every record of --input and writes the vectors, in input order, to --output."""
    vocab = load_vocab(args.vocab)
    state, ckpt = load_encoder(args.checkpoint, vocab)
    records = load_jsonl(args.input, CorpusRecord)
    logger.info(f"Embedding {len(records)} texts with the {ckpt.stage} checkpoint (max_len={args.max_len})")

    vectors = encode(state, [r.text for r in records], vocab, args.max_len,
                     ids=[r.id for r in records], show_progress=True)
    output_dir = os.path.dirname(os.path.abspath(args.output))
    os.makedirs(output_dir, exist_ok=True)
    if args.format == "jsonl":
        save_embeddings_jsonl(vectors, args.output)
    else:
        save_embeddings(vectors, args.output)
    return {"embeddings": args.output, "count": len(vectors)}
