#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# pcnet_registration documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import os
import sys
sys.path.insert(0, os.path.abspath('.'))
sys.path.insert(0, os.path.abspath('..'))

about = {}
with open(os.path.join(os.path.abspath('..'), 'pcnet_registration', '__version__.py')) as f:
    exec(f.read(), about)

# -- General configuration ------------------------------------------------

extensions = ['sphinx.ext.autodoc',
    'sphinx.ext.doctest',
    'sphinx.ext.mathjax',
    'sphinx.ext.todo',
    'sphinx.ext.coverage',
    'sphinx.ext.viewcode']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'pcnet_registration'
copyright = about['__copyright__']
author = about['__author__']

# The short X.Y version and the full version.
version = '.'.join(about['__version__'].split('.')[:2])
release = about['__version__']

language = None
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'
todo_include_todos = True


# -- Options for HTML output ----------------------------------------------

html_theme = 'alabaster'
html_theme_options = {
    'show_powered_by': False,
    'show_related': False,
    'note_bg': '#FFF59C'
}
html_static_path = ['_static']
htmlhelp_basename = 'pcnetregistrationdoc'


# -- Options for LaTeX output ---------------------------------------------

latex_elements = {}
latex_documents = [
    (master_doc, 'pcnet_registration.tex', 'pcnet_registration Documentation',
     author, 'manual'),
]


# -- Options for manual page output ---------------------------------------

man_pages = [
    (master_doc, 'pcnet-reg', 'pcnet_registration Documentation',
     [author], 1)
]


# -- Options for Texinfo output -------------------------------------------

texinfo_documents = [
    (master_doc, 'pcnet_registration', 'pcnet_registration Documentation',
     author, 'pcnet_registration', about['__description__'],
     'Miscellaneous'),
]
