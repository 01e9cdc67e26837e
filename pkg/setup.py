from setuptools import setup, find_packages

setup(
    name="taxonomy-acceptability",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        "typer",
        "rich",
        "pydantic",
        "pydantic-settings",
        "python-dotenv",
        "aiohttp",
        "structlog",
        "dependency-injector",
        "PyYAML",
        "numpy",
        "pandas",
        "tabulate",
        "scipy",
        "scikit-learn",
        "joblib",
        "tqdm",
    ],
    extras_require={
        "transformers": ["torch", "transformers", "sentence-transformers"],
        "test": ["pytest", "pytest-cov", "pytest-asyncio"],
    },
    entry_points={
        "console_scripts": ["taxacc=interfaces.cli:app"],
    },
    python_requires=">=3.9",
)
