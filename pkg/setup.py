import os
import pathlib
from typing import Any, Dict, cast

from setuptools import find_packages, setup


def get_version(version_file: "os.PathLike[str]") -> str:
    locls: Dict[str, Any] = {}
    exec(open(version_file).read(), {}, locls)
    return cast(str, locls["__version__"])


here = pathlib.Path(__file__).parent.resolve()

readme_file = here / "README.md"
long_description = readme_file.read_text(encoding="utf-8")

version_file = here / "src" / "sigadapt" / "version.py"
version = get_version(version_file)


setup(
    name="sigadapt",
    version=version,
    description="Turn EEG and other multi-channel time series into images and text for pretrained models",
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="MIT",
    classifiers=[
        "Development Status :: 2 - Pre-Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Medical Science Apps.",
    ],
    package_dir={"": "src"},
    packages=find_packages(where="src"),
    package_data={"sigadapt": ["py.typed"]},
    python_requires=">=3.8, <4",
    install_requires=[
        "numpy>=1.21",
        "pypng>=0.20220715",
        "click>=8.0",
    ],
    entry_points={
        "console_scripts": ["sigadapt=sigadapt.cli:main"],
    },
    zip_safe=False,
)
