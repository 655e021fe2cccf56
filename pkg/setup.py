from setuptools import setup, find_packages

setup(
    name="rcbc_synth",
    version="1.0.0",
    packages=find_packages(exclude=["examples", "examples.*"]),
    package_data={
        'rcbc_synth': ['config/*.yaml', 'config/*.json'],
    },
    install_requires=[
        "numpy",
        "scipy",
        "pyyaml",
    ],
    extras_require={
        'test': ["pytest", "pytest-cov"],
    },
    entry_points={
        'console_scripts': [
            'rcbc-synth=rcbc_synth.src.cli:main',
        ],
    },
)
