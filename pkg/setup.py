import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

version = {}
with open("exgrad/version.py", "r") as fh:
    exec(fh.read(), version)

setuptools.setup(
    name="exgrad",
    version=version["__version__"],
    description="An extragradient solver for common solutions of variational inequalities, \
        equilibrium and fixed-point problems in uniformly convex spaces",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=["tests", "tests.*", "scripts", "examples", "examples.*"]),
    package_data={"exgrad": ["presets/*.json"]},
    python_requires=">=3.10",
    install_requires=[
        "jax >= 0.4.35",
        "jaxlib >= 0.4.35",
        "scipy >= 1.15.1",
        "pandas >= 2.2.3",
    ],
    entry_points={"console_scripts": ["exgrad=exgrad.cli:main"]},
    )
