# Configuration file for the Sphinx documentation builder.
#
# This file only contains a selection of the most common options. For a full
# list see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Project information -----------------------------------------------------
from droid.__version__ import __version__, __author__
project = 'DROID'
copyright = '2021, ' + __author__
author = __author__
version = __version__

# -- General configuration ---------------------------------------------------

# Add any Sphinx extension module names here, as strings. They can be
# extensions coming with Sphinx (named 'sphinx.ext.*') or your custom
# ones.
extensions = [
    "sphinx.ext.intersphinx", 
    "recommonmark", 
]

# Add any paths that contain templates here, relative to this directory.
templates_path = ['_templates']

# List of patterns, relative to source directory, that match files and
# directories to ignore when looking for source files.
# This pattern also affects html_static_path and html_extra_path.
exclude_patterns = []


# -- Options for HTML output -------------------------------------------------

html_theme = "alabaster"

html_theme_options = {
    'show_powered_by': False,
    'note_bg': '#FFF59C',
    'page_width': '80%',
    'sidebar_width': '20%',
    'description': 'Domain randomization from a single demonstration, sim2sim testbed',
}

html_static_path = []
