from chipless_sensor.tools.base import get_tools, get_tools_by_name
from chipless_sensor.tools.sensor_tools import (
    extract_capacitor_tool,
    invert_temperature_tool,
    resonant_frequency_tool,
    sensitivity_report_tool,
    tuning_capacitor_tool,
)

__all__ = [
    "get_tools",
    "get_tools_by_name",
    "resonant_frequency_tool",
    "tuning_capacitor_tool",
    "extract_capacitor_tool",
    "invert_temperature_tool",
    "sensitivity_report_tool",
]
