import sys
from typing import List, Optional

from pydantic import ValidationError

from .cli import dispatch
from .exceptions import ConfigException, StivException


def main(argv: Optional[List[str]] = None) -> int:
    try:
        dispatch(argv)
    except ValidationError as exc:
        error = exc.errors()[0]
        key = ".".join(str(part) for part in error["loc"]) or exc.title
        exc = ConfigException(f"{key}: {error['msg']}")
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except StivException as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
