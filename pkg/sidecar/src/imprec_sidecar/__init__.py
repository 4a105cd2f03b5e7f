"""imprec-sidecar: adapter fine-tuned completion server for the imprec protocol."""

from .decoding import generate
from .lora import LoRALinear, apply_lora
from .model import ModelConfig, TinyCausalLM, load_model, save_model
from .server import create_app
from .training import pretrain, run_finetune

__version__ = "0.1.0"
