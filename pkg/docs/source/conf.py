# Sphinx configuration for the sedil API reference.

import os
import sys

sys.path.insert(0, os.path.abspath("../../"))

project = "sedil"
release = "0.1"

extensions = ["sphinx.ext.autodoc"]
autodoc_member_order = "bysource"
exclude_patterns = ["_build"]

html_theme = "nature"
