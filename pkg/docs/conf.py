# Sphinx configuration for the kgalign docs. The pages are
# markdown, rendered through myst-parser.
from pathlib import Path

import toml

pyproject = toml.load(Path(__file__).resolve().parents[1] / "pyproject.toml")
metadata = pyproject["tool"]["poetry"]

project = metadata["name"]
author = ", ".join(a.split(" <")[0] for a in metadata["authors"])
copyright = f"2022, {author}"
release = metadata["version"]

extensions = ["myst_parser"]
myst_enable_extensions = ["linkify"]
source_suffix = {".rst": "restructuredtext", ".md": "markdown"}
exclude_patterns = ["_build"]

html_theme = "alabaster"
