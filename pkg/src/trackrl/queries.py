"""Query text generation: deterministic templates or a remote chat endpoint.

Template mode fills fixed slots (object ids, reference positions, window
length, query kind) and is the default everywhere tests run. Remote mode
posts the tracking prompt to a chat-completions endpoint and stores the
returned text verbatim; any failure falls back to the template with a
warning, so dataset builds never depend on the network.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import requests

from .geometry import BBox
from .instances import QueryInstance

logger = logging.getLogger(__name__)

API_KEY_ENV = "TRACKRL_QUERY_API_KEY"

PROMPT_TEMPLATE = """{textual_query}

{initial_locations}

The following images correspond to consecutive
frames of a video.

Please output the bounding box for the object in
each frame using the following format:

[{{"frame": N, "bbox": [x1, y1, x2, y2]}}, ...]

Do not include any additional text."""

_INITIAL_LINE = "Initially, object {obj_id} is located at {initial_bbox}\nin the reference image."


def _fmt_box(b: BBox) -> str:
    def num(v: float) -> str:
        return str(int(v)) if v == int(v) else repr(v)

    return f"[{num(b.x1)}, {num(b.y1)}, {num(b.x2)}, {num(b.y2)}]"


def template_query(instance: QueryInstance) -> str:
    """Deterministic slot-filled query text for a draft instance."""
    ids = sorted(instance.reference_boxes)
    n = len(instance.future_frames)
    if instance.query_kind == "multi":
        listed = ", ".join(
            f"object {oid} at {_fmt_box(instance.reference_boxes[oid])}" for oid in ids
        )
        return (
            f"Track the {len(ids)} referenced objects ({listed}) from the "
            f"reference frame across the next {n} frames."
        )
    oid = ids[0]
    box = _fmt_box(instance.reference_boxes[oid])
    if instance.query_kind == "occlusion":
        return (
            f"Track object {oid}, occluded at {box} in the reference frame, "
            f"as it becomes visible over the next {n} frames."
        )
    return (
        f"Track object {oid}, located at {box} in the reference frame, "
        f"across the next {n} frames."
    )


def render_prompt(instance: QueryInstance) -> str:
    """The full tracking prompt for an instance, one initial line per object."""
    lines = [
        _INITIAL_LINE.format(
            obj_id=oid, initial_bbox=_fmt_box(instance.reference_boxes[oid])
        )
        for oid in sorted(instance.reference_boxes)
    ]
    query = instance.query_text or template_query(instance)
    return PROMPT_TEMPLATE.format(textual_query=query, initial_locations="\n".join(lines))


@dataclass(frozen=True)
class RemoteQueryClient:
    """Chat-completions client for query generation.

    The API key is read from the environment (``TRACKRL_QUERY_API_KEY``)
    and never stored in configuration files.
    """

    base_url: str
    model: str = "default"
    timeout: float = 10.0
    api_key_env: str = API_KEY_ENV

    def generate(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        response = requests.post(
            self.base_url.rstrip("/") + "/chat/completions",
            json={
                "model": self.model,
                "messages": [{"role": "user", "content": prompt}],
            },
            headers=headers,
            timeout=self.timeout,
        )
        response.raise_for_status()
        payload = response.json()
        content = payload["choices"][0]["message"]["content"]
        if not isinstance(content, str) or not content.strip():
            raise ValueError("remote query endpoint returned empty text")
        return content.strip()


def generate_query(instance: QueryInstance, mode: str = "template",
                   client: RemoteQueryClient | None = None) -> str:
    """Query text for a draft instance via the requested mode.

    Remote failures of any kind degrade to the template with a warning.
    """
    if mode == "template":
        return template_query(instance)
    if mode != "remote":
        raise ValueError(f"unknown query mode: {mode!r}")
    if client is None:
        raise ValueError("remote query mode requires a client")
    try:
        return client.generate(render_prompt(instance))
    except (requests.RequestException, ValueError, KeyError, IndexError, TypeError) as exc:
        logger.warning(
            "remote query generation failed for %s (%s); using template",
            instance.instance_id, exc,
        )
        return template_query(instance)
