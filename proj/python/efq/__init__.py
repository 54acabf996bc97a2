"""Error-feedback quantizer design, rate-distortion analysis and simulation."""

import json as _json

from ._efq import *  # noqa: F401,F403
from ._efq import default_config_json as _default_config_json


def default_config():
    """Default experiment configuration as a dict."""
    return _json.loads(_default_config_json())
