import unittest
from unittest.mock import mock_open, patch

from PySubstructuring.exceptions import ConfigError
from PySubstructuring.preset_mapper import PresetMapper, normalize_preset_name

PRESETS = (
    '{"presets": {"fig6": [{"label": "coarse", "Nsteps": 10}, {"Nsteps": 20}],'
    ' "other": []},'
    ' "aliases": {"time_refinement": "fig6"}}'
)


class TestPresetMapper(unittest.TestCase):
    def test_load_json_data_success(self):
        # Test if the preset entries are loaded
        with patch("builtins.open", mock_open(read_data=PRESETS)):
            mapper = PresetMapper("presets.json", "fig6")
            self.assertEqual(len(mapper.json_data), 2)

    def test_name_is_normalized(self):
        # Case and whitespace are ignored
        self.assertEqual(normalize_preset_name(" Fig 6 "), "fig6")
        with patch("builtins.open", mock_open(read_data=PRESETS)):
            mapper = PresetMapper("presets.json", " FIG6 ")
            self.assertEqual(mapper.preset, "fig6")

    def test_alias_resolves_to_preset(self):
        with patch("builtins.open", mock_open(read_data=PRESETS)):
            mapper = PresetMapper("presets.json", " Time_Refinement")
        self.assertEqual(mapper.requested, "time_refinement")
        self.assertEqual(mapper.preset, "fig6")
        self.assertEqual(len(mapper.json_data), 2)

    def test_load_json_data_missing_preset(self):
        # Test if a missing preset raises a ConfigError naming the available ones
        with patch("builtins.open", mock_open(read_data=PRESETS)):
            with self.assertRaises(ConfigError) as context:
                PresetMapper("presets.json", "fig7")
        self.assertIn("fig6, other", str(context.exception))
        self.assertIn("time_refinement", str(context.exception))

    def test_missing_preset_is_value_error(self):
        with patch("builtins.open", mock_open(read_data=PRESETS)):
            with self.assertRaises(ValueError):
                PresetMapper("presets.json", "space_refinement")

    def test_labels(self):
        # Unlabelled entries fall back to their position
        with patch("builtins.open", mock_open(read_data=PRESETS)):
            mapper = PresetMapper("presets.json", "fig6")
            self.assertEqual(mapper.labels(), ["coarse", "1"])

    def test_expand(self):
        with patch("builtins.open", mock_open(read_data=PRESETS)):
            mapper = PresetMapper("presets.json", "fig6")
        base = {"Nsteps": 5, "T": 0.05}
        expanded = mapper.expand(base)
        self.assertEqual(expanded[0], {"Nsteps": 10, "T": 0.05, "label": "coarse"})
        self.assertEqual(expanded[1]["Nsteps"], 20)
        # the base is left untouched
        self.assertEqual(base, {"Nsteps": 5, "T": 0.05})


if __name__ == "__main__":
    unittest.main()
