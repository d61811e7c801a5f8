#
# R A V E N B E N C H
#
# Abstract reasoning tasks over factored image models, disentanglement scores,
# and relation network reasoners trained on representations.
#
#
import re
import hashlib
import json
from datetime import datetime

#
# ##############################################################
# References used throughout Ravenbench
#
from .constant import *  # noqa: F403

#
# ##############################################################
# Version and information
#
__NAME__ = "ravenbench"
__COPYRIGHT__ = f"© 2024-{datetime.now().strftime('%Y')} Ravenbench authors"

__version__ = "1.2.0"

#
# ##########################################################################
# Logging
#
SPAM_LEVEL = 15
LOGFILE = "ravenbench.log"
FORMAT = "[%(asctime)s] %(levelname)s %(threadName)s %(filename)s:%(funcName)s:%(lineno)d: %(message)s"


#
# ##########################################################################
# Utility functions
#
def now():
    return datetime.now().astimezone()


def parse_options(options: str | None) -> dict:
    """Parses "a=2,b, c = x" into {"a": "2", "b": True, "c": "x"}.

    Spaces are removed unless they are between quotes.
    """
    if options is None or options == "":
        return {}
    rx = r"""(?x)
        \s
        (?=
            (
                " [^\'"]* "
                |
                [^\'"]
            ) *
            $
        )
    """
    options = re.sub(rx, "", options)
    result = {}
    for opt in options.split(","):
        if opt == "":
            continue
        opt_arr = opt.split("=")
        if len(opt_arr) > 1:
            result[opt_arr[0]] = "=".join(opt_arr[1:]).strip('"')
        else:
            result[opt_arr[0]] = True
    return result


def digest(data, length: int = 12) -> str:
    """Short stable digest of a json-serialisable structure (keys sorted)."""
    text = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:length]


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
