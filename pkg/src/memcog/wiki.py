"""Wiki-file persistence: byte-deterministic serialization and its inverse.

Layout under a store root:

    user/assistant/<dimension>/index.md     one per dimension
    user/assistant/<dimension>/<slug>.md    one per page (archived pages stay on disk)
    .memcog/meta.json                       owner, order, access log, sidecar section data
    .memcog/links.json                      overlay graph records

The markdown layer is the human-readable store; everything the markdown
grammar cannot carry (confidence, facts, temporal context, supersession,
status, access statistics) lives in meta.json.
"""

from __future__ import annotations

import os
import re
from pathlib import Path

from .errors import ParseError, ValidationError
from .links import LinkGraph
from .store import (
    PATH_PREFIX,
    SECTION_CATEGORIES,
    AccessEntry,
    Dimension,
    Fact,
    MemoryStore,
    Page,
    Section,
    page_path,
    validate_store,
)
from .textutil import pretty_json, text_digest

META_PATH = ".memcog/meta.json"
LINKS_PATH = ".memcog/links.json"

_WIKI_LINK_RE = re.compile(r"^\[\[([^\[\]]+)\]\]")
_INDEX_FILE_RE = re.compile(r"^user/assistant/([^/]+)/index\.md$")
_PAGE_FILE_RE = re.compile(r"^user/assistant/([^/]+)/(?!index\.md$)([^/]+)\.md$")


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------

def page_text(page: Page) -> str:
    lines = [
        f"# {page.title}",
        f"- {page.summary}",
        f"- aliases: [{', '.join(page.aliases)}]",
        f"- tags: [{', '.join(page.tags)}]",
    ]
    for key, value in page.annotations:
        lines.append(f"- {key}: {value}")
    for section in page.sections:
        lines.append("")
        lines.append(f"## {section.title}")
        lines.append(f"- category: {section.category}")
        lines.append(f"- detail: {section.detail}")
        for key, value in section.annotations:
            lines.append(f"- {key}: {value}")
        if section.related_pages:
            lines.append("- Page:")
            for ref in section.related_pages:
                lines.append(f"  - [[{ref}]]")
    return "\n".join(lines) + "\n"


def index_text(dimension: Dimension) -> str:
    lines = [f"# {dimension.name}", f"- {dimension.description}", "", "## Pages"]
    for page in dimension.active_pages():
        alias_part = f" ({', '.join(page.aliases)})" if page.aliases else ""
        tag_part = "".join(f" #{tag}" for tag in page.tags[:3])
        lines.append(f"- [[{page.title}]]{alias_part} : {page.summary}{tag_part}")
    return "\n".join(lines) + "\n"


def _meta_payload(store: MemoryStore) -> dict:
    return {
        "format": "memcog/1",
        "owner_id": store.owner_id,
        "dimensions": [
            {"name": dim.name, "pages": [p.path for p in dim.pages]}
            for dim in store.dimensions
        ],
        "access_log": {
            path: {"read_count": entry.read_count, "last_access": entry.last_access}
            for path, entry in sorted(store.access_log.items())
        },
        "creation_stats": {str(k): v for k, v in sorted(store.creation_stats.items())},
        "page_meta": {
            page.path: {
                "status": page.status,
                "created_at": store.page_created.get(page.path),
                "sections": [
                    {
                        "confidence": section.confidence,
                        "temporal_context": section.temporal_context,
                        "facts": [fact.to_list() for fact in section.facts],
                        "superseded_by": section.superseded_by,
                        "original_detail": section.original_detail,
                    }
                    for section in page.sections
                ],
            }
            for _, page in store.iter_pages()
        },
        "pending_links": store.pending_links,
        "last_ingested": store.last_ingested,
    }


def serialize_store(store: MemoryStore) -> dict[str, str]:
    """Full file tree (path -> text). Byte-deterministic for a given store."""
    validate_store(store)
    tree: dict[str, str] = {}
    for dim in store.dimensions:
        tree[f"{PATH_PREFIX}/{dim.name}/index.md"] = index_text(dim)
        for page in dim.pages:
            tree[page.path] = page_text(page)
    tree[META_PATH] = pretty_json(_meta_payload(store))
    tree[LINKS_PATH] = pretty_json(store.links.to_records())
    return tree


def store_digest(store: MemoryStore) -> str:
    tree = serialize_store(store)
    return text_digest("\n".join(f"{path}\n{tree[path]}" for path in sorted(tree)))


# ---------------------------------------------------------------------------
# Parsers
# ---------------------------------------------------------------------------

class _Lines:
    def __init__(self, path: str, text: str):
        self.path = path
        self.lines = text.split("\n")
        self.pos = 0

    def peek(self) -> str | None:
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def take(self) -> str | None:
        line = self.peek()
        if line is not None:
            self.pos += 1
        return line

    def skip_blank(self) -> None:
        while self.peek() is not None and not self.peek().strip():
            self.pos += 1

    def error(self, message: str, at_peek: bool = False) -> ParseError:
        line = self.pos + 1 if at_peek else max(self.pos, 1)
        return ParseError(message, path=self.path, line=line)


def _split_list(raw: str) -> list[str]:
    raw = raw.strip()
    if not (raw.startswith("[") and raw.endswith("]")):
        raise ValueError("not a bracketed list")
    inner = raw[1:-1]
    if not inner.strip():
        return []
    return [item.strip() for item in inner.split(",")]


def _parse_bullet(line: str) -> tuple[str, str] | None:
    """Split '- key: value' into (key, value); None when there is no key."""
    body = line[2:]
    key, sep, value = body.partition(": ")
    if sep and key and (" " not in key or key in ("category", "detail", "aliases", "tags")):
        return key, value
    return None


def parse_page_text(path: str, text: str) -> Page:
    src = _Lines(path, text)
    src.skip_blank()
    first = src.take()
    if first is None or not first.startswith("# "):
        raise src.error("missing page heading")
    title = first[2:]

    src.skip_blank()
    summary_line = src.take()
    if summary_line is None or not summary_line.startswith("- "):
        raise src.error("missing summary bullet")
    summary = summary_line[2:]

    aliases: list[str] = []
    tags: list[str] = []
    annotations: list[tuple[str, str]] = []
    while src.peek() is not None and src.peek().startswith("- "):
        line = src.take()
        parsed = _parse_bullet(line)
        if parsed is None:
            raise src.error(f"unrecognized list entry {line!r}")
        key, value = parsed
        if key == "aliases":
            try:
                aliases = _split_list(value)
            except ValueError:
                raise src.error("malformed aliases list") from None
        elif key == "tags":
            try:
                tags = _split_list(value)
            except ValueError:
                raise src.error("malformed tags list") from None
        else:
            annotations.append((key, value))

    sections: list[Section] = []
    src.skip_blank()
    while src.peek() is not None:
        header = src.take()
        if not header.startswith("## "):
            raise src.error(f"expected section heading, got {header!r}")
        sections.append(_parse_section(src, header[3:]))
        src.skip_blank()

    return Page(
        path=path,
        title=title,
        summary=summary,
        aliases=aliases,
        tags=tags,
        sections=sections,
        annotations=annotations,
    )


def _parse_section(src: _Lines, title: str) -> Section:
    category: str | None = None
    detail: str | None = None
    related: list[str] = []
    annotations: list[tuple[str, str]] = []
    while src.peek() is not None and src.peek().strip():
        line = src.peek()
        if line.startswith("## "):
            break
        src.take()
        if line == "- Page:":
            while src.peek() is not None and src.peek().startswith("  - "):
                entry = src.take()[4:]
                match = _WIKI_LINK_RE.match(entry)
                if match is None or match.end() != len(entry):
                    raise src.error(f"malformed wiki link {entry!r}")
                related.append(match.group(1))
            continue
        if not line.startswith("- "):
            raise src.error(f"unrecognized section content {line!r}")
        parsed = _parse_bullet(line)
        if parsed is None:
            raise src.error(f"unrecognized list entry {line!r}")
        key, value = parsed
        if key == "category":
            if value not in SECTION_CATEGORIES:
                raise src.error(f"unknown category token {value!r}")
            category = value
        elif key == "detail":
            detail = value
        else:
            annotations.append((key, value))
    if category is None:
        raise src.error(f"section {title!r} missing category")
    if detail is None:
        raise src.error(f"section {title!r} missing detail")
    return Section(
        title=title,
        category=category,
        detail=detail,
        related_pages=related,
        annotations=annotations,
    )


def parse_index_text(path: str, text: str) -> tuple[str, str, list[str]]:
    """Returns (dimension name, description, page titles in listed order)."""
    src = _Lines(path, text)
    src.skip_blank()
    first = src.take()
    if first is None or not first.startswith("# "):
        raise src.error("missing dimension heading")
    name = first[2:]
    src.skip_blank()
    desc_line = src.take()
    if desc_line is None or not desc_line.startswith("- "):
        raise src.error("missing description bullet")
    description = desc_line[2:]
    src.skip_blank()
    pages_header = src.take()
    if pages_header != "## Pages":
        raise src.error("missing '## Pages' heading")
    titles = []
    src.skip_blank()
    while src.peek() is not None and src.peek().strip():
        line = src.take()
        if not line.startswith("- [["):
            raise src.error(f"unrecognized index entry {line!r}")
        match = _WIKI_LINK_RE.match(line[2:])
        if match is None:
            raise src.error(f"malformed wiki link in index entry {line!r}")
        titles.append(match.group(1))
    src.skip_blank()
    if src.peek() is not None:
        raise src.error(f"unexpected trailing content {src.peek()!r}", at_peek=True)
    return name, description, titles


def _check_meta(meta: dict) -> None:
    """Shape-check the metadata fields parse_store consumes."""
    def bad(what: str) -> ParseError:
        return ParseError(f"malformed metadata: {what}", path=META_PATH)

    dims = meta.get("dimensions", [])
    if not isinstance(dims, list):
        raise bad("'dimensions' must be an array")
    for d in dims:
        if not isinstance(d, dict) or not isinstance(d.get("name"), str) or not isinstance(
            d.get("pages", []), list
        ):
            raise bad(f"dimension record {d!r}")
    access = meta.get("access_log", {})
    if not isinstance(access, dict) or not all(isinstance(v, dict) for v in access.values()):
        raise bad("'access_log' must map paths to objects")
    stats = meta.get("creation_stats", {})
    if not isinstance(stats, dict):
        raise bad("'creation_stats' must be an object")
    for key, value in stats.items():
        try:
            int(key), int(value)
        except (TypeError, ValueError):
            raise bad(f"creation_stats entry {key!r}: {value!r}") from None
    page_meta = meta.get("page_meta", {})
    if not isinstance(page_meta, dict):
        raise bad("'page_meta' must be an object")
    for path, sidecar in page_meta.items():
        if not isinstance(sidecar, dict) or not isinstance(sidecar.get("sections", []), list):
            raise bad(f"page_meta entry for {path!r}")
        if not all(isinstance(s, dict) for s in sidecar.get("sections", [])):
            raise bad(f"section sidecars for {path!r}")
    if not isinstance(meta.get("pending_links", []), list):
        raise bad("'pending_links' must be an array")


def parse_store(tree: dict[str, str]) -> MemoryStore:
    """Inverse of serialize_store up to whitespace normalization."""
    import json

    meta: dict = {}
    if META_PATH in tree:
        try:
            meta = json.loads(tree[META_PATH])
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", path=META_PATH) from None
        if not isinstance(meta, dict):
            raise ParseError("metadata must be a JSON object", path=META_PATH)
        _check_meta(meta)

    indexes: dict[str, tuple[str, list[str]]] = {}
    page_files: dict[str, list[str]] = {}
    for path in tree:
        m = _INDEX_FILE_RE.match(path)
        if m:
            name, description, titles = parse_index_text(path, tree[path])
            if name != m.group(1):
                raise ParseError(
                    f"index heading {name!r} does not match directory {m.group(1)!r}",
                    path=path, line=1,
                )
            indexes[name] = (description, titles)
            continue
        m = _PAGE_FILE_RE.match(path)
        if m:
            page_files.setdefault(m.group(1), []).append(path)

    meta_dims = [d["name"] for d in meta.get("dimensions", [])]
    all_dims = set(indexes) | set(page_files)
    dim_order = [d for d in meta_dims if d in all_dims]
    dim_order += sorted(all_dims - set(dim_order))

    meta_page_order = {d["name"]: d["pages"] for d in meta.get("dimensions", [])}
    page_meta = meta.get("page_meta", {})

    store = MemoryStore(owner_id=meta.get("owner_id", "user"))
    for name in dim_order:
        description, titles = indexes.get(name, ("", []))
        dim = Dimension(name=name, description=description)
        files = set(page_files.get(name, []))
        ordered: list[str] = []
        for path in meta_page_order.get(name, []):
            if path in files:
                ordered.append(path)
                files.discard(path)
        for title in titles:
            path = page_path(name, title)
            if path in files:
                ordered.append(path)
                files.discard(path)
        ordered.extend(sorted(files))
        for path in ordered:
            page = parse_page_text(path, tree[path])
            sidecar = page_meta.get(path, {})
            page.status = sidecar.get("status", "active")
            for i, raw in enumerate(sidecar.get("sections", [])):
                if i >= len(page.sections):
                    break
                section = page.sections[i]
                try:
                    section.confidence = float(raw.get("confidence", 1.0))
                    section.facts = [Fact.from_list(f) for f in raw.get("facts", [])]
                except (TypeError, ValueError, IndexError) as exc:
                    raise ParseError(
                        f"malformed section sidecar for {path!r}: {exc}", path=META_PATH
                    ) from None
                section.temporal_context = raw.get("temporal_context")
                section.superseded_by = raw.get("superseded_by")
                section.original_detail = raw.get("original_detail")
            dim.pages.append(page)
            store.page_created[path] = sidecar.get("created_at")
        store.dimensions.append(dim)

    for path, raw in meta.get("access_log", {}).items():
        try:
            store.access_log[path] = AccessEntry(
                read_count=int(raw.get("read_count", 0)),
                last_access=raw.get("last_access"),
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(
                f"malformed access_log entry for {path!r}: {exc}", path=META_PATH
            ) from None
    for path in store.page_paths():
        store.access_log.setdefault(path, AccessEntry())
    store.creation_stats = {
        int(k): int(v) for k, v in meta.get("creation_stats", {}).items()
    }
    store.pending_links = list(meta.get("pending_links", []))
    store.last_ingested = meta.get("last_ingested")

    if LINKS_PATH in tree:
        try:
            records = json.loads(tree[LINKS_PATH])
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", path=LINKS_PATH) from None
        if not isinstance(records, list) or not all(isinstance(r, dict) for r in records):
            raise ParseError("link records must be a JSON array of objects", path=LINKS_PATH)
        try:
            store.links = LinkGraph.from_records(records)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed link record: {exc}", path=LINKS_PATH) from None

    validate_store(store)
    return store


# ---------------------------------------------------------------------------
# Disk IO
# ---------------------------------------------------------------------------

def write_store(store: MemoryStore, root: str | Path, prune: bool = True) -> None:
    """Write the serialized tree under root; each file lands atomically."""
    root = Path(root)
    tree = serialize_store(store)
    for rel, text in tree.items():
        target = root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_name(target.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, target)
    if prune:
        keep = {str(root / rel) for rel in tree}
        base = root / "user" / "assistant"
        if base.exists():
            for found in base.rglob("*.md"):
                if str(found) not in keep:
                    found.unlink()


def read_tree(root: str | Path) -> dict[str, str]:
    root = Path(root)
    tree: dict[str, str] = {}
    base = root / "user" / "assistant"
    if base.exists():
        for found in sorted(base.rglob("*.md")):
            tree[found.relative_to(root).as_posix()] = found.read_text(encoding="utf-8")
    for rel in (META_PATH, LINKS_PATH):
        candidate = root / rel
        if candidate.exists():
            tree[rel] = candidate.read_text(encoding="utf-8")
    return tree


def read_store(root: str | Path) -> MemoryStore:
    root = Path(root)
    if not (root / "user" / "assistant").exists() and not (root / META_PATH).exists():
        raise ValidationError(f"no store found under {root}")
    return parse_store(read_tree(root))
