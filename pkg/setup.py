try:
    from setuptools import find_packages, setup
except ImportError as exc:  # pragma: no cover - user environment bootstrap path
    raise SystemExit(
        "Missing Python build dependency: setuptools.\n"
        "Bootstrap your Python environment with:\n"
        "  python3 -m ensurepip --upgrade\n"
        "  python3 -m pip install --upgrade pip setuptools wheel\n"
        "Then retry:\n"
        "  python3 -m pip install -e ."
    ) from exc


setup(
    name="flmimo",
    version="0.1.0",
    description="Joint power and computing-frequency allocation for FL and non-FL users in massive MIMO.",
    packages=find_packages(include=["flmimo", "flmimo.*"]),
    package_data={"flmimo": ["configs/*.cfg"]},
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.20",
        "scipy>=1.7",
    ],
)
