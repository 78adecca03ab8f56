"""Shared helpers for the figure scripts: output directory and plotting."""

import argparse
import os

from ioncrystal import io


def parser(description, default_out):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", default=default_out, help="output directory")
    return p


def outdir(path):
    os.makedirs(path, exist_ok=True)
    return path


def plot(path, series, xlabel, ylabel, title=""):
    try:
        io.svg_plot(path, series, xlabel, ylabel, title)
    except ImportError:
        print("matplotlib not installed; skipping", path)
