# daf_numerics/utils/color_log.py

from typing import Any, Dict, Optional

from .. import config


# ANSI Color Codes
class ANSI:
    """Class containing standard ANSI escape codes for coloring terminal output."""

    # Text Styles
    BOLD = "\033[1m"
    RESET = "\033[0m"

    # Standard Colors
    RED = "\033[31m"
    GREEN = "\033[32m"
    YELLOW = "\033[33m"
    CYAN = "\033[36m"

    # Bright Colors (used for numeric evidence)
    B_YELLOW = "\033[93m"
    B_GREEN = "\033[92m"
    B_CYAN = "\033[96m"
    B_RED = "\033[91m"


PASSING_VERDICTS = {
    "pass",
    "accepted",
    "converged",
    "no-violation-found",
    "conjugacy",
    "quasi-isometric",
    "coherent",
    "uniformly-compact",
    "center-fixing",
    "found",
    "unique",
    "branching",
    "complete",
}
INCONCLUSIVE_VERDICTS = {"inconclusive", "not-found"}


def colorize(text: str, color_code: str) -> str:
    """Wraps text in ANSI color codes."""
    return f"{color_code}{text}{ANSI.RESET}"


def verdict_color(verdict: str) -> str:
    if verdict in PASSING_VERDICTS:
        return ANSI.B_GREEN
    if verdict in INCONCLUSIVE_VERDICTS:
        return ANSI.B_YELLOW
    return ANSI.B_RED


def log_check(title: str, detail: Optional[str] = None) -> None:
    """Announce a check about to run."""
    if not config.VERBOSE:
        return
    line = f"\n{ANSI.BOLD}---> CHECK:{ANSI.RESET} {colorize(title, ANSI.CYAN)}"
    if detail:
        line += f"\n     | {detail}"
    print(line)


def log_verdict(title: str, verdict: str, evidence: Optional[Dict[str, Any]] = None) -> None:
    """Print a verdict block with one evidence line per entry."""
    if not config.VERBOSE:
        return
    lines = [f"\n{ANSI.BOLD}---> VERDICT:{ANSI.RESET} {title} - {colorize(verdict, verdict_color(verdict))}"]
    for key, value in (evidence or {}).items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        lines.append(f"     | {key}: {colorize(str(value), ANSI.B_CYAN)}")
    print("\n".join(lines))


def log_warning(message: str) -> None:
    if config.VERBOSE:
        print(colorize(f"Warning: {message}", ANSI.YELLOW))
