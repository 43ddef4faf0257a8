"""
Run configuration and named presets.
"""

from .run_config import RunConfig, load_config, save_config
from .presets import PRESETS, get_all_presets, get_preset, get_preset_names

__all__ = ['RunConfig', 'load_config', 'save_config', 'PRESETS', 'get_all_presets',
           'get_preset', 'get_preset_names']
