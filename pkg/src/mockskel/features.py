"""Feature extraction: turn a traffic log into a rectangular nominal table.

Every attribute follows a fixed naming grammar that skeleton files and
the mock server share:

    method, statusCode, schema, host, uriPathToken<i>, uriQuery:<key>,
    uriFragment, hasPayload, hasValidPayload, hasAuthorisationToken,
    requestheader:<Name>, responseheader:<Name>, requestjson:<dot.path>,
    responsejson:<dot.path>, hasImmediatePreviousTransaction,
    prev:method, prev:statusCode, everCreated, everRead, everUpdated,
    everDeleted

Request-side and state attributes are inputs, response-side attributes
(statusCode, responseheader:*, responsejson:*) are prediction targets.
Two sentinel values are reserved: "null" for absent URI components and
"no-exist" for absent headers, query keys, and JSON keys.  Observed data
values that would collide with a sentinel are escaped with a "lit:"
prefix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from fnmatch import fnmatchcase
from typing import Iterable, Mapping, Sequence
from urllib.parse import parse_qsl

from .errors import UnknownAttributeError
from .traffic import (
    HttpRequest,
    HttpTransaction,
    ResourceKeyConfig,
    TrafficLog,
    crud_class,
    group_by_resource,
    path_shape,
)

SENTINEL_NULL = "null"
SENTINEL_NO_EXIST = "no-exist"
_ESCAPE_PREFIX = "lit:"

STATE_ATTRIBUTES = (
    "hasImmediatePreviousTransaction",
    "prev:method",
    "prev:statusCode",
    "everCreated",
    "everRead",
    "everUpdated",
    "everDeleted",
)


def escape_literal(value: str) -> str:
    """Escape an observed data value so it cannot collide with a sentinel."""
    if value in (SENTINEL_NULL, SENTINEL_NO_EXIST) or value.startswith(_ESCAPE_PREFIX):
        return _ESCAPE_PREFIX + value
    return value


def unescape_literal(value: str) -> str:
    if value.startswith(_ESCAPE_PREFIX):
        return value[len(_ESCAPE_PREFIX):]
    return value


class Role(str, Enum):
    INPUT = "input"
    TARGET = "target"


def role_for(name: str) -> Role:
    if name == "statusCode" or name.startswith(("responseheader:", "responsejson:")):
        return Role.TARGET
    return Role.INPUT


def sentinel_for(name: str) -> str:
    """Fill value for an attribute absent from a given transaction."""
    if name.startswith("uriPathToken") or name == "uriFragment":
        return SENTINEL_NULL
    return SENTINEL_NO_EXIST


@dataclass(frozen=True)
class Attribute:
    name: str
    role: Role
    domain: tuple[str, ...] = ()


@dataclass(frozen=True)
class Instance:
    values: tuple[str, ...]
    transaction_id: str = ""


@dataclass(frozen=True)
class InstanceTable:
    """Rectangular nominal dataset: attribute schema plus instances."""

    schema: tuple[Attribute, ...]
    instances: tuple[Instance, ...]

    def __post_init__(self):
        names = [a.name for a in self.schema]
        if len(set(names)) != len(names):
            raise ValueError("duplicate attribute names in schema")
        width = len(self.schema)
        for inst in self.instances:
            if len(inst.values) != width:
                raise ValueError(
                    f"instance {inst.transaction_id!r} has {len(inst.values)} values, schema has {width}"
                )

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.schema)

    def index_of(self, name: str) -> int:
        for i, a in enumerate(self.schema):
            if a.name == name:
                return i
        raise UnknownAttributeError(f"no attribute named {name!r}")

    def attribute(self, name: str) -> Attribute:
        return self.schema[self.index_of(name)]

    def inputs(self) -> tuple[Attribute, ...]:
        return tuple(a for a in self.schema if a.role is Role.INPUT)

    def targets(self) -> tuple[Attribute, ...]:
        return tuple(a for a in self.schema if a.role is Role.TARGET)

    def column(self, name: str) -> list[str]:
        i = self.index_of(name)
        return [inst.values[i] for inst in self.instances]

    def row_mapping(self, i: int) -> dict[str, str]:
        inst = self.instances[i]
        return {a.name: v for a, v in zip(self.schema, inst.values)}


def nominal_sort(values: Iterable[str]) -> tuple[str, ...]:
    """Deterministic domain order: numeric when all values are finite
    numbers, lexicographic otherwise."""
    vals = sorted(set(values))
    try:
        keyed = [(float(v), v) for v in vals]
    except ValueError:
        return tuple(vals)
    if any(math.isnan(k) or math.isinf(k) for k, _ in keyed):
        return tuple(vals)
    return tuple(v for _, v in sorted(keyed))


@dataclass(frozen=True)
class ExtractionConfig:
    resource: ResourceKeyConfig = ResourceKeyConfig()
    #: request headers that carry authorisation material
    auth_header_names: tuple[str, ...] = ("Authorization", "Cookie")
    auth_header_patterns: tuple[str, ...] = ("x-*-token",)
    #: bound on schema width for pathological URIs
    max_path_depth: int = 16

    def is_auth_header(self, name: str) -> bool:
        lname = name.lower()
        if lname in {n.lower() for n in self.auth_header_names}:
            return True
        return any(fnmatchcase(lname, p.lower()) for p in self.auth_header_patterns)

    def to_json_dict(self) -> dict:
        return {
            "resourceKey": self.resource.to_json_dict(),
            "authHeaderNames": list(self.auth_header_names),
            "authHeaderPatterns": list(self.auth_header_patterns),
            "maxPathDepth": self.max_path_depth,
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping) -> "ExtractionConfig":
        return cls(
            resource=ResourceKeyConfig.from_json_dict(obj.get("resourceKey", {})),
            auth_header_names=tuple(obj.get("authHeaderNames", ("Authorization", "Cookie"))),
            auth_header_patterns=tuple(obj.get("authHeaderPatterns", ("x-*-token",))),
            max_path_depth=int(obj.get("maxPathDepth", 16)),
        )


@dataclass(frozen=True)
class ExtractionProfile:
    """Dataset-wide facts discovered during extraction that the mock
    server needs again at serve time."""

    path_depth: int = 0
    #: flattened JSON prefixes that were arrays in the recordings
    array_paths: tuple[str, ...] = ()
    #: "METHOD /path/{id}" shapes observed in the recordings
    shapes: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# Per-transaction extractors


def extract_general(txn: HttpTransaction) -> dict[str, str]:
    """``method`` (input) and ``statusCode`` (target)."""
    return {"method": txn.request.method, "statusCode": str(txn.response.status_code)}


def tokenize_uri(uri: str, max_path_depth: int | None = None) -> dict[str, str]:
    """URI-derived attributes: scheme, host, positional path tokens,
    query keys, and fragment (only components present in the URI)."""
    from .traffic import _split_absolute_uri

    parts = _split_absolute_uri(uri)
    out = {
        "schema": escape_literal(parts.scheme.lower()),
        "host": escape_literal(parts.netloc.lower()),
    }
    tokens = [t for t in parts.path.split("/") if t]
    if max_path_depth is not None:
        tokens = tokens[:max_path_depth]
    for i, token in enumerate(tokens):
        out[f"uriPathToken{i}"] = escape_literal(token)
    for key, value in parse_qsl(parts.query, keep_blank_values=True):
        out.setdefault(f"uriQuery:{key}", escape_literal(value))
    if parts.fragment:
        out["uriFragment"] = escape_literal(parts.fragment)
    return out


def canonical_scalar(value) -> str:
    """Canonical nominal spelling of a JSON scalar."""
    if value is True:
        return "true"
    if value is False:
        return "false"
    if value is None:
        return "null"
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def _flatten(value, path: str, out: dict[str, str], arrays: set[str]) -> None:
    if isinstance(value, dict):
        for key, sub in value.items():
            _flatten(sub, f"{path}.{key}" if path else str(key), out, arrays)
    elif isinstance(value, list):
        if path:
            arrays.add(path)
        for element in value:
            _flatten(element, path, out, arrays)
    else:
        if not path:
            return
        text = canonical_scalar(value)
        # first non-null value wins when array elements collide
        if path not in out or (out[path] == "null" and text != "null"):
            out[path] = text


def flatten_json(body, prefix: str) -> dict[str, str]:
    """Flatten a parsed JSON value to ``prefix:dot.path`` attributes.

    Nested objects become dot paths; arrays are merged index-free (union
    of element keys, first non-null value wins).
    """
    flat: dict[str, str] = {}
    _flatten(body, "", flat, set())
    return {f"{prefix}:{path}": value for path, value in flat.items()}


def _json_content(body: bytes | None, content_type: str | None):
    """(has_payload, is_valid_json, parsed_value)."""
    if body is None or len(body) == 0:
        return False, False, None
    if content_type is not None and "json" not in content_type.lower():
        return True, False, None
    try:
        return True, True, json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return True, False, None


REQUEST, RESPONSE = "request", "response"


def _payload_features(txn: HttpTransaction, side: str) -> tuple[dict[str, str], set[str]]:
    out: dict[str, str] = {}
    arrays: set[str] = set()
    if side == REQUEST:
        has, valid, value = _json_content(txn.request.body, txn.request.body_content_type)
        out["hasPayload"] = "true" if has else "false"
        out["hasValidPayload"] = "true" if valid else "false"
        prefix = "requestjson"
    else:
        has, valid, value = _json_content(txn.response.body, txn.response.header("Content-Type"))
        prefix = "responsejson"
    if valid:
        flat: dict[str, str] = {}
        _flatten(value, "", flat, arrays)
        for path, text in flat.items():
            out[f"{prefix}:{path}"] = escape_literal(text)
        arrays = {f"{prefix}:{p}" for p in arrays}
    return out, arrays


def extract_payload_features(txn: HttpTransaction, side: str = REQUEST) -> dict[str, str]:
    """Body-derived attributes for one side of a transaction.

    The request side carries the boolean ``hasPayload``/``hasValidPayload``
    attributes plus ``requestjson:*`` keys; the response side only its
    flattened ``responsejson:*`` keys.
    """
    out, _ = _payload_features(txn, side)
    return out


def extract_header_features(
    txn: HttpTransaction, config: ExtractionConfig = ExtractionConfig()
) -> dict[str, str]:
    """Header attributes (first value wins for duplicate names) plus
    ``hasAuthorisationToken``."""
    out: dict[str, str] = {}
    seen: set[tuple[str, str]] = set()
    for side, headers in (("requestheader", txn.request.headers), ("responseheader", txn.response.headers)):
        for name, value in headers:
            key = (side, name.lower())
            if key in seen:
                continue
            seen.add(key)
            out[f"{side}:{name}"] = escape_literal(value)
    has_auth = any(config.is_auth_header(name) for name, _ in txn.request.headers)
    out["hasAuthorisationToken"] = "true" if has_auth else "false"
    return out


@dataclass(frozen=True)
class TransactionSummary:
    """What state features need to know about one past transaction."""

    method: str
    status_code: int
    crud: str | None


def summarize(txn: HttpTransaction, config: ResourceKeyConfig = ResourceKeyConfig()) -> TransactionSummary:
    return TransactionSummary(
        method=txn.request.method,
        status_code=txn.response.status_code,
        crud=crud_class(txn.request, config),
    )


def state_features_from_history(history: Sequence[TransactionSummary]) -> dict[str, str]:
    """State attributes from the ordered predecessors on the same resource."""
    prev = history[-1] if history else None
    flags = {"create": False, "read": False, "update": False, "delete": False}
    for item in history:
        if item.crud is not None:
            flags[item.crud] = True
    return {
        "hasImmediatePreviousTransaction": "true" if history else "false",
        "prev:method": prev.method if prev else SENTINEL_NO_EXIST,
        "prev:statusCode": str(prev.status_code) if prev else SENTINEL_NO_EXIST,
        "everCreated": "true" if flags["create"] else "false",
        "everRead": "true" if flags["read"] else "false",
        "everUpdated": "true" if flags["update"] else "false",
        "everDeleted": "true" if flags["delete"] else "false",
    }


def extract_state_features(
    txn: HttpTransaction,
    history: Sequence[HttpTransaction],
    config: ResourceKeyConfig = ResourceKeyConfig(),
) -> dict[str, str]:
    """State attributes for ``txn`` given its same-resource predecessors
    (transactions with smaller sequence, in order)."""
    summaries = [summarize(t, config) for t in history]
    return state_features_from_history(summaries)


# ---------------------------------------------------------------------------
# Whole-table extraction


def request_feature_map(request: HttpRequest, config: ExtractionConfig = ExtractionConfig()) -> dict[str, str]:
    """All request-side attributes of a bare request (no response, no state).

    Shared by training extraction and the mock server so that both sides
    compute feature values identically.
    """
    out = {"method": request.method}
    out.update(tokenize_uri(request.uri, config.max_path_depth))
    has, valid, value = _json_content(request.body, request.body_content_type)
    out["hasPayload"] = "true" if has else "false"
    out["hasValidPayload"] = "true" if valid else "false"
    if valid:
        flat: dict[str, str] = {}
        _flatten(value, "", flat, set())
        for path, text in flat.items():
            out[f"requestjson:{path}"] = escape_literal(text)
    has_auth = any(config.is_auth_header(name) for name, _ in request.headers)
    out["hasAuthorisationToken"] = "true" if has_auth else "false"
    seen = set()
    for name, value in request.headers:
        if name.lower() in seen:
            continue
        seen.add(name.lower())
        out[f"requestheader:{name}"] = escape_literal(value)
    return out


_URI_FAMILY_PREFIXES = ("uriPathToken", "uriQuery:", "uriFragment")


def serve_input_values(
    input_names: Sequence[str],
    request: HttpRequest,
    history: Sequence[TransactionSummary],
    config: ExtractionConfig = ExtractionConfig(),
    also_known: Sequence[str] = (),
) -> tuple[dict[str, str], int]:
    """Feature vector for a live request against a known input schema.

    Returns the name->value mapping plus the number of URI-side features
    the request presented that the schema cannot represent (deeper paths,
    unknown query keys, fragments never seen in training).  ``also_known``
    names features deliberately dropped from the schema (e.g. constant
    inputs), which do not count as unmatched.
    """
    raw = request_feature_map(request, config)
    raw.update(state_features_from_history(history))
    known = set(input_names) | set(also_known)
    values = {name: raw.get(name, sentinel_for(name)) for name in input_names}
    unmatched = sum(
        1
        for key in raw
        if key not in known and key.startswith(_URI_FAMILY_PREFIXES)
    )
    return values, unmatched


def _canonical_header_key(
    raw_key: str, canonical: dict[str, dict[str, str]]
) -> str:
    side, _, name = raw_key.partition(":")
    table = canonical[side]
    return f"{side}:{table.setdefault(name.lower(), name)}"


def extract_table(
    log: TrafficLog, config: ExtractionConfig = ExtractionConfig()
) -> tuple[InstanceTable, ExtractionProfile]:
    """One instance per transaction over the union schema of the dataset."""
    groups = group_by_resource(log, config.resource)
    history_of: dict[str, tuple[TransactionSummary, ...]] = {}
    for txns in groups.values():
        summaries: list[TransactionSummary] = []
        for txn in txns:
            history_of[txn.id] = tuple(summaries)
            summaries.append(summarize(txn, config.resource))

    rows: list[dict[str, str]] = []
    depth = 0
    query_keys: dict[str, None] = {}
    fragment_seen = False
    req_json_keys: dict[str, None] = {}
    resp_json_keys: dict[str, None] = {}
    header_canon: dict[str, dict[str, str]] = {"requestheader": {}, "responseheader": {}}
    header_keys: dict[str, dict[str, None]] = {"requestheader": {}, "responseheader": {}}
    array_paths: set[str] = set()
    shapes: dict[str, None] = {}

    for txn in log.transactions:
        row = extract_general(txn)
        uri_map = tokenize_uri(txn.request.uri, config.max_path_depth)
        depth = max(depth, sum(1 for k in uri_map if k.startswith("uriPathToken")))
        for key, value in uri_map.items():
            if key.startswith("uriQuery:"):
                query_keys.setdefault(key, None)
            elif key == "uriFragment":
                fragment_seen = True
        row.update(uri_map)

        for side, discovered in ((REQUEST, req_json_keys), (RESPONSE, resp_json_keys)):
            payload, arrays = _payload_features(txn, side)
            array_paths.update(arrays)
            prefix = "requestjson:" if side == REQUEST else "responsejson:"
            for key in payload:
                if key.startswith(prefix):
                    discovered.setdefault(key, None)
            row.update(payload)

        for raw_key, value in extract_header_features(txn, config).items():
            if raw_key == "hasAuthorisationToken":
                row[raw_key] = value
                continue
            key = _canonical_header_key(raw_key, header_canon)
            side = key.split(":", 1)[0]
            header_keys[side].setdefault(key, None)
            row[key] = value

        row.update(state_features_from_history(history_of[txn.id]))
        shapes.setdefault(path_shape(txn.request, config.resource), None)
        rows.append(row)

    if not rows:
        return InstanceTable(schema=(), instances=()), ExtractionProfile()

    names: list[str] = ["method", "statusCode", "schema", "host"]
    names += [f"uriPathToken{i}" for i in range(depth)]
    names += list(query_keys)
    if fragment_seen:
        names.append("uriFragment")
    names += ["hasPayload", "hasValidPayload"]
    names += list(req_json_keys)
    names.append("hasAuthorisationToken")
    names += list(header_keys["requestheader"])
    names += list(header_keys["responseheader"])
    names += list(resp_json_keys)
    names += list(STATE_ATTRIBUTES)

    instances = tuple(
        Instance(
            values=tuple(row.get(name, sentinel_for(name)) for name in names),
            transaction_id=txn.id,
        )
        for row, txn in zip(rows, log.transactions)
    )
    schema = tuple(
        Attribute(
            name=name,
            role=role_for(name),
            domain=nominal_sort(inst.values[i] for inst in instances),
        )
        for i, name in enumerate(names)
    )
    profile = ExtractionProfile(
        path_depth=depth,
        array_paths=tuple(sorted(array_paths)),
        shapes=tuple(shapes),
    )
    return InstanceTable(schema=schema, instances=instances), profile


def build_instance_table(log: TrafficLog, config: ExtractionConfig = ExtractionConfig()) -> InstanceTable:
    table, _ = extract_table(log, config)
    return table


# ---------------------------------------------------------------------------
# ARFF export


def _arff_quote(text: str) -> str:
    if text == "":
        return "''"
    specials = set(" ,{}%'\"\t")
    if any(c in specials for c in text):
        return "'" + text.replace("\\", "\\\\").replace("'", "\\'") + "'"
    return text


def to_arff(table: InstanceTable, relation: str = "traffic") -> str:
    """Render a table in ARFF-compatible text form."""
    lines = [f"@relation {_arff_quote(relation)}", ""]
    for attr in table.schema:
        domain = ",".join(_arff_quote(v) for v in attr.domain)
        lines.append(f"@attribute {_arff_quote(attr.name)} {{{domain}}}")
    lines.append("")
    lines.append("@data")
    for inst in table.instances:
        lines.append(",".join(_arff_quote(v) for v in inst.values))
    return "\n".join(lines) + "\n"
