from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="PySubstructuring",
    version="1.0.0",
    keywords="domain decomposition substructuring time stepping parabolic hyperbolic",
    description="Regionally-additive substructuring schemes for 2D parabolic and hyperbolic problems, with stability certification and convergence experiments.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["unittests*"]),
    data_files=[
        (
            "config",
            [
                "PySubstructuring/config/settings.json",
                "PySubstructuring/config/presets.json",
            ],
        )
    ],
    include_package_data=True,
    package_data={"PySubstructuring": ["config/*.json"]},
    python_requires=">=3.9",
    install_requires=["pandas==2.1.1", "numpy>=1.22,<2", "scipy>=1.12"],
    entry_points={"console_scripts": ["pysubstructuring=PySubstructuring.cli:main"]},
)
