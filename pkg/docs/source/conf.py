import os
import sys

sys.path.insert(0, os.path.abspath('../../'))

project   = 'exgrad'
release   = '0.1.0'
extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.viewcode',
    'sphinx.ext.intersphinx',
    'sphinx.ext.autosummary',
    'myst_parser',
    'sphinx.ext.mathjax',
]

myst_enable_extensions = [
    "dollarmath",
    "deflist",
]
autodoc_mock_imports = ['jax', 'jax.numpy', 'jaxlib', 'pandas', 'scipy']
autodoc_default_options = {
    'undoc-members': True,
}
autodoc_member_order = 'bysource'
exclude_patterns = ['Thumbs.db', '.DS_Store']
html_theme = 'sphinx_rtd_theme'
source_suffix = {'.rst': 'restructuredtext', '.md': 'markdown'}
