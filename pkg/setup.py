from setuptools import setup, find_packages

setup(
    name="brmdp",
    version="0.1.0",
    packages=find_packages(exclude=["examples", "examples.*", "brmdp.tests"]),
    package_data={"brmdp": ["schemas/*.json"]},
    install_requires=[
        "click>=8.0.0",
        "numpy>=1.22",
        "scipy>=1.8",
    ],
    entry_points={
        'console_scripts': [
            'brmdp=brmdp.cli:cli',
        ],
    },
)
