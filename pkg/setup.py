import setuptools


setuptools.setup(
    name='gtiming',
    version='0.1.0',
    packages=['gtiming'],
    package_dir={'': 'src'},
    classifiers=[
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
    ],
    python_requires='>=3.8',
    install_requires=[
        'click>=7.0,<9',
        'attrs>=19.1',
        'toml',
        'schematics',
        'numpy>=1.22',
        'scipy>=1.4',
        'pandas>=1.0',
        'lifelines>=0.25',
    ],
    entry_points={
        'console_scripts': [
            'gtiming = gtiming.cli:main',
        ],
    },
)
