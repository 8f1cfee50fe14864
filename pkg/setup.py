from setuptools import find_packages, setup

setup(
    name="src",
    packages=find_packages(),
    version="0.1.0",
    description="Optimisation de politiques à flot dans l'espace latent d'un décodeur gelé",
    author="Mathieu Morey",
    license="MIT",
    install_requires=[
        "numpy >= 1.23.3",
        "pandas >= 1.5.1",
        "pyyaml >= 6.0",
        "matplotlib >= 3.6",
        "tqdm >= 4.64",
    ],
    entry_points={"console_scripts": ["fpo = src.harness.cli:cli_main"]},
)
