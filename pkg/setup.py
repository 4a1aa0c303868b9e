"""Setup for the btc-forecast command-line tool."""

from setuptools import setup

setup(
    name="btc-forecast",
    version="0.1.0",
    description="Next-day BTC-USD close forecasting with sentiment features and a long/cash backtest",
    python_requires=">=3.10",
    py_modules=[
        "backtester",
        "config",
        "featurizer",
        "fng_client",
        "indicators",
        "main",
        "market_data",
        "reporting",
        "storage",
        "tuner",
    ],
    packages=["models"],
    install_requires=[
        "requests>=2.31.0",
        "numpy>=1.24",
        "pandas>=2.0",
        "matplotlib>=3.7",
    ],
    entry_points={"console_scripts": ["btc-forecast=main:main"]},
)
