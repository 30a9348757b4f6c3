"""Natural-language question to Land Matrix API query toolkit.

Subpackages cover the full pipeline: canonical query modelling and
parsing, embedding retrieval, LLM prompting strategies, query execution
against the live API or recorded cassettes, and the evaluation harness
that scores generated queries against expert references.
"""

__version__ = "0.1.0"

from nl2api.errors import Nl2ApiError

__all__ = ["Nl2ApiError", "__version__"]
