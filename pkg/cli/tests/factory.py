import json
from pathlib import Path

import numpy as np
from click.testing import CliRunner
from PIL import Image

from cployo.settings import DOCS_DIR
from datatrain.config import dump_config
from datatrain.tests.factory import TrainConfigFactory

from ..commands import cli


def run(*args):
    """Invoke the group the way a shell would; stderr is kept apart from the document."""
    return CliRunner(mix_stderr=False).invoke(cli, [str(a) for a in args])


def document(result):
    """The single JSON document a command printed."""
    lines = [line for line in result.stdout.splitlines() if line.strip()]
    assert len(lines) == 1, result.stdout
    return json.loads(lines[0])


def write_config(path: Path, **overrides) -> Path:
    """Write a training config built by the factory as JSON."""
    path.write_text(json.dumps(dump_config(TrainConfigFactory(**overrides))), encoding="utf-8")
    return path


def write_png(path: Path, pixels: np.ndarray) -> Path:
    """Save ``pixels`` as an 8-bit PNG."""
    Image.fromarray(pixels.astype(np.uint8)).save(path, format="PNG")
    return path


def load_schema():
    """The output schema shipped in ``docs/``."""
    return json.loads((DOCS_DIR / "cli_schema.json").read_text(encoding="utf-8"))


def required_keys(schema, name):
    """Required data keys of one command, following ``allOf`` composition."""
    definition = schema["$defs"][name]
    keys = set(definition.get("required", ()))
    for part in definition.get("allOf", ()):
        if "$ref" in part:
            keys |= required_keys(schema, part["$ref"].rsplit("/", 1)[-1])
        keys |= set(part.get("required", ()))
    return keys
