# This file adheres to the "black" code formatting style.
# More information about black: https://github.com/psf/black
import json
from typing import List

from PySubstructuring.exceptions import ConfigError


def normalize_preset_name(preset: str) -> str:
    # lower and delete spaces from input string
    return "".join(preset.split()).lower()


class PresetMapper:
    def __init__(self, file_path: str, preset: str):
        """
        Initialize a PresetMapper instance.

        Parameters:
            file_path (str): The path to the JSON file containing the presets.
            preset (str): The name of the preset (e.g., "fig5") or one of its
                aliases (e.g., "sigma_orders").
        """
        self.file_path = file_path
        self.requested = normalize_preset_name(preset)
        self.load_json_data()

    def load_json_data(self):
        """
        Load JSON data from the specified file, resolve aliases and validate
        the presence of the requested preset.

        The file holds a ``presets`` object (name to list of entries) and an
        optional ``aliases`` object (alias to preset name).

        Raises:
            ConfigError: If the preset is not present in the JSON data.
        """
        with open(self.file_path, "r") as file:
            json_data = json.load(file)
        presets = json_data.get("presets", {})
        aliases = json_data.get("aliases", {})
        self.preset = aliases.get(self.requested, self.requested)
        if self.preset not in presets:
            raise ConfigError(
                f"Preset {self.requested!r} not found, available presets: "
                f"{', '.join(sorted(presets))} (aliases: {', '.join(sorted(aliases))})"
            )
        else:
            self.json_data = presets[self.preset]

    def labels(self) -> List[str]:
        return [entry.get("label", str(i)) for i, entry in enumerate(self.json_data)]

    def expand(self, base: dict) -> List[dict]:
        """
        Merge every entry of the preset over a base configuration.

        Parameters:
            base (dict): Configuration values the preset entries override.

        Returns:
            list: One configuration dict per entry, keyed by the entry label.
        """
        expanded = []
        for label, entry in zip(self.labels(), self.json_data):
            merged = dict(base)
            merged.update({key: value for key, value in entry.items() if key != "label"})
            merged["label"] = label
            expanded.append(merged)
        return expanded
