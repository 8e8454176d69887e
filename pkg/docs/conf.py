#!/usr/bin/env python
#
# cilvr documentation build configuration file.

import os
import sys

sys.path.insert(0, os.path.abspath(".."))

import cilvr  # noqa: E402

extensions = ["sphinx.ext.autodoc", "sphinx.ext.viewcode", "sphinx_autodoc_typehints"]
source_suffix = ".rst"
master_doc = "index"

project = "cilvr"
copyright = "2024, cilvr contributors"
author = "cilvr contributors"
version = cilvr.__version__
release = cilvr.__version__

exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]
pygments_style = "sphinx"
autodoc_member_order = "bysource"

html_theme = "sphinx_rtd_theme"
htmlhelp_basename = "cilvrdoc"
