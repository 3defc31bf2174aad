from setuptools import setup

setup(
    name="graph-ews",
    packages=["graph_ews"],
    install_requires=[
        "blobfile>=1.0.5",
        "networkx>=2.8",
        "numpy",
        "scipy",
        "tqdm",
    ],
    extras_require={"test": ["pytest", "torch"]},
)
