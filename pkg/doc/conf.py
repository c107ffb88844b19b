# gtiming documentation build configuration file.
import sys, os

sys.path.insert(0, os.path.abspath('../src'))

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.intersphinx',
    'sphinx.ext.todo',
    'sphinx.ext.coverage',
    'sphinx.ext.viewcode',
    'sphinx_rtd_theme',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'gtiming'
copyright = u'2024, gtiming developers'
version = '0.1'
release = '0.1.0'

exclude_patterns = ['_build']
show_authors = True
pygments_style = 'sphinx'

html_theme = 'sphinx_rtd_theme'
html_static_path = ['_static']
htmlhelp_basename = 'gtimingdoc'

latex_documents = [
  ('index', 'gtiming.tex', u'gtiming Documentation', u'gtiming developers', 'manual'),
]
man_pages = [
    ('index', 'gtiming', u'gtiming Documentation', [u'gtiming developers'], 1)
]

intersphinx_mapping = {
    'python': ('http://docs.python.org/3/', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'pandas': ('https://pandas.pydata.org/docs/', None),
    'lifelines': ('https://lifelines.readthedocs.io/en/latest/', None),
}

autodoc_member_order = 'bysource'
