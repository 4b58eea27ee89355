"""Live progress display for long running pipeline stages.

Each stage (rate-distortion sweeps, feature extraction, selection steps and
so on) gets a line of its own. The display is only refreshed when enough
time has passed, so that tight loops can report every item cheaply.
"""
from __future__ import annotations

import time
import weakref
from functools import partial
from typing import TYPE_CHECKING

from rich.live import Live
from rich.markup import escape

if TYPE_CHECKING:
    from collections.abc import Callable, Iterator

    from rich.console import Console


def long_enough(max_time: float) -> Iterator[bool]:
    """Generate True each time 'max_time' has elapsed."""
    prev_trigger = time.monotonic()
    while True:
        now = time.monotonic()
        if now - prev_trigger >= max_time:
            yield True
            prev_trigger = now
        else:
            yield False


class StageBar:
    """Base for a single line of the progress display."""

    parent: ProgressDisplay

    def __init__(self, *, label: str):
        self.label = label
        self._dirty = True
        self._cache = ''

    @property
    def label_width(self) -> int:
        """The width required for the label column."""
        return self.parent.label_width

    def render(self) -> str:
        """Render this bar as a line of text."""
        if self._dirty:
            label = f'{escape(self.label):<{self.label_width}}'
            status, text = self.render_status(), self.render_text()
            self._cache = f'{status}{label} {text}'
            self._dirty = False
        return self._cache

    def render_status(self) -> str:
        """Render the leading status column."""
        return ' ' * self.parent.status_width

    def render_text(self) -> str:
        """Render the trailing, free text, part of this bar."""
        return ''


class CountingBar(StageBar):
    """A bar showing the percentage of a known number of items done."""

    def __init__(self, *, total: int, label: str):
        super().__init__(label=label)
        self.total = max(total, 1)
        self.count = 0
        self.text = ''

    def update(
            self, *, count: int | None = None, advance: int = 0,
            text: str | None = None) -> None:
        """Set or advance the count and, optionally, the trailing text."""
        new_count = self.count + advance if count is None else count
        if new_count != self.count:
            self.count = new_count
            self._dirty = True
        if text is not None and text != self.text:
            self.text = text
            self._dirty = True

    @property
    def done(self) -> bool:
        """True once every item has been counted."""
        return self.count >= self.total

    def render_status(self) -> str:
        """Render the percent complete column."""
        if self.done:
            return '[green][100%][/green] '
        p = int(min(self.count / self.total * 100.0, 99.0))
        return f'[cyan][{p:<3}%][/cyan] '

    def render_text(self) -> str:
        """Render the item count and any text."""
        counts = f'{self.count}/{self.total}'
        return f'{counts} {escape(self.text)}' if self.text else counts


class TextBar(StageBar):
    """A bar that shows changing descriptive text."""

    def __init__(self, *, label: str):
        super().__init__(label=label)
        self.text = ''

    def update(self, *, text: str | None = None, **_counts: int) -> None:
        """Update the text of this bar; item counts are ignored."""
        if text is not None and self.text != text:
            self.text = text
            self._dirty = True

    def render_text(self) -> str:
        """Render the text."""
        return escape(self.text)


class ProgressDisplay:
    """A set of stage bars shown using a Rich `Live` display.

    :console: The console to display on.
    :enabled: When false, bars are tracked but never displayed.
    """

    def __init__(self, console: Console, *, enabled: bool = True):
        self.console = console
        self.enabled = enabled
        self.bars: dict[str, StageBar] = {}
        self._label_width = -1
        self.time_trigger = long_enough(0.1)
        self.live = Live(
            console=console,
            auto_refresh=False,
            transient=False,
            get_renderable=self.get_renderable)
        self.stored_output: list[Callable[[], None]] = []

    def add_bar(self, name: str, *, bar: StageBar) -> StageBar:
        """Add a bar to this progress display, starting it if necessary."""
        if name not in self.bars:
            self.bars[name] = bar
            bar.parent = weakref.proxy(self)
            self._label_width = -1
            for b in self.bars.values():
                b._dirty = True
            self.start()
        return self.bars[name]

    def start(self) -> None:
        """Start or resume the live display."""
        if self.enabled and not self.live.is_started:
            self.live.start()

    def stop(self) -> None:
        """Stop the live display and flush any buffered output."""
        if self.live.is_started:
            self.live.refresh()
            self.live.stop()
        for func in self.stored_output:
            func()
        self.stored_output[:] = []

    def get_renderable(self) -> str:
        """Get a renderable form of this progress display.

        This is called by the Rich.Live instance.
        """
        return '\n'.join(bar.render() for bar in self.bars.values())

    def update(self, name: str, *, refresh: bool = False, **kwargs) -> None:
        """Update a given bar.

        :name:    The name identifying the bar.
        :refresh: If set then the display is unconditionally refreshed.
        :kwargs:  The keyword arguments required by the bar's update method.
        """
        bar = self.bars.get(name)
        if bar:
            bar.update(**kwargs)
        if self.live.is_started and (next(self.time_trigger) or refresh):
            self.live.refresh()

    def handle_output(self, func, *args, **kwargs) -> None:
        """Handle a non-progress output request.

        If the live display is active then the request is buffered until live
        output ends.
        """
        if self.live.is_started:
            self.stored_output.append(partial(func, *args, **kwargs))
        else:
            func(*args, **kwargs)

    @property
    def label_width(self) -> int:
        """The width required for the label column."""
        if self._label_width < 0:
            self._label_width = max(
                (len(bar.label) for bar in self.bars.values()), default=10)
        return self._label_width

    @property
    def status_width(self) -> int:
        """The width of the status column; 7 when any bar counts items."""
        if any(isinstance(b, CountingBar) for b in self.bars.values()):
            return 7
        return 0
