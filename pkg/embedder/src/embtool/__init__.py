"""embtool: turn segment files into DEMB embeddings, serve /embed, and
generate desk-scale retrieval fixtures."""

__version__ = "0.1.0"

from .demb import read_demb, write_demb_atomic
from .encoders import EncoderError, PseudoEncoder, make_encoder
from .fixtures import make_fixture
from .jobs import EmbedJob, embed_query, embed_segments, write_query_demb
from .server import make_server, start_background

__all__ = [
    "__version__", "read_demb", "write_demb_atomic", "EncoderError",
    "PseudoEncoder", "make_encoder", "make_fixture", "EmbedJob",
    "embed_query", "embed_segments", "write_query_demb", "make_server",
    "start_background",
]
