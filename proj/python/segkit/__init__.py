"""Instance-segmentation dataset synthesis, conversion and scoring."""

import json as _json

from ._segkit import (  # noqa: F401
    MANIFEST_FORMAT_VERSION,
    SegkitError,
    __version__,
    evaluate,
    filter_predictions,
    format_yolo,
    glmask,
    grayscale,
    lab_lightness,
    mask_iou,
    mask_to_polygon,
    parse_yolo,
    polygon_to_mask,
    read_png,
    rotate_pair,
    run_cli,
    write_png,
)


class CommandError(RuntimeError):
    """A segkit command exited with a non-zero status."""

    def __init__(self, code, stderr):
        super().__init__(f"segkit exited {code}: {stderr.strip()}")
        self.code = code
        self.stderr = stderr


def command(name, *args, jobs=None, **options):
    """Run a subcommand and return its JSON summary.

    Keyword options become flags: ``overlay_min=5`` is ``--overlay-min 5``,
    ``True`` adds a bare flag and ``False``/``None`` are skipped.
    """
    argv = ["--json", "-q"]
    if jobs is not None:
        argv += ["--jobs", str(jobs)]
    argv.append(name)
    argv += [str(a) for a in args]
    for key, value in options.items():
        if value is None or value is False:
            continue
        flag = "--" + key.replace("_", "-")
        argv.append(flag)
        if value is not True:
            argv.append(str(value))
    code, out, err = run_cli(argv)
    if code != 0:
        raise CommandError(code, err)
    return _json.loads(out) if out.strip() else {}


def synth(**options):
    return command("synth", **options)


def rotaug(**options):
    return command("rotaug", **options)


def pseudo(**options):
    return command("pseudo", **options)


def convert(**options):
    return command("convert", **options)
