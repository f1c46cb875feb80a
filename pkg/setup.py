import os
from pathlib import Path

from setuptools import find_packages, setup

if __name__ == "__main__":
    with Path(Path(__file__).parent, "README.md").open(encoding="utf-8") as file:
        long_description = file.read()

    def _read_reqs(relpath):
        fullpath = os.path.join(os.path.dirname(__file__), relpath)
        with open(fullpath) as f:
            return [s.strip() for s in f.readlines() if (s.strip() and not s.startswith("#"))]

    REQUIREMENTS = _read_reqs("requirements.txt")

    setup(
        name="minimal_eos",
        packages=find_packages(exclude=["tests", "tests.*"]),
        package_data={"minimal_eos": ["configs/*.cfg"]},
        include_package_data=True,
        version="0.1.0",
        license="MIT",
        description="Edge of stability dynamics of a minimal two-layer linear network, with theorem checks",
        long_description=long_description,
        long_description_content_type="text/markdown",
        entry_points={"console_scripts": ["minimal-eos = minimal_eos.cli:main"]},
        data_files=[
            (".", ["README.md"]),
        ],
        keywords=["machine learning", "gradient descent", "edge of stability", "sharpness"],
        install_requires=REQUIREMENTS,
        classifiers=[
            "Development Status :: 4 - Beta",
            "Intended Audience :: Science/Research",
            "Topic :: Scientific/Engineering :: Artificial Intelligence",
            "License :: OSI Approved :: MIT License",
            "Programming Language :: Python :: 3.8",
        ],
    )
