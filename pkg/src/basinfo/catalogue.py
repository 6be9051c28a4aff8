"""Dataset discovery: Dublin-Core metadata records over a CSW 2.0.2 subset.

Only the HTTP GET key-value binding is spoken, with three operations:
GetCapabilities, GetRecords, GetRecordById. Records arrive here already
filtered by permission, so counts never leak invisible datasets. Protocol
errors become OWS exception reports (still HTTP 200), never JSON errors.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from datetime import date
from typing import Mapping, Optional, Sequence
from xml.etree import ElementTree as ET

CSW_NS = "http://www.opengis.net/cat/csw/2.0.2"
DC_NS = "http://purl.org/dc/elements/1.1/"
DCT_NS = "http://purl.org/dc/terms/"
OWS_NS = "http://www.opengis.net/ows"
XLINK_NS = "http://www.w3.org/1999/xlink"

for prefix, uri in (("csw", CSW_NS), ("dc", DC_NS), ("dct", DCT_NS),
                    ("ows", OWS_NS), ("xlink", XLINK_NS)):
    ET.register_namespace(prefix, uri)

CSW_VERSION = "2.0.2"
OPERATIONS = ("GetCapabilities", "GetRecords", "GetRecordById")
MAX_RECORDS_LIMIT = 1000


class RecordType(str, enum.Enum):
    SERIES = "series"
    STATION = "station"
    VECTOR = "vector"
    RASTER = "raster"
    DOCUMENT = "document"
    CATCHMENT = "catchment"


@dataclass(frozen=True)
class MetadataRecord:
    """One discoverable dataset: identity, description, extent."""

    identifier: str
    title: str
    abstract: str
    keywords: tuple
    rtype: RecordType
    bbox: Optional[tuple[float, float, float, float]] = None
    temporal_start: Optional[date] = None
    temporal_end: Optional[date] = None
    modified: str = ""

    def matches_keyword(self, keyword: str) -> bool:
        hay = " ".join([self.title, *self.keywords]).lower()
        return keyword.lower() in hay

    def to_json_obj(self) -> dict:
        return {
            "identifier": self.identifier,
            "title": self.title,
            "abstract": self.abstract,
            "keywords": list(self.keywords),
            "type": self.rtype.value,
            "bbox": list(self.bbox) if self.bbox else None,
            "temporalStart": self.temporal_start.isoformat() if self.temporal_start else None,
            "temporalEnd": self.temporal_end.isoformat() if self.temporal_end else None,
            "modified": self.modified,
        }


def _q(ns: str, local: str) -> str:
    return f"{{{ns}}}{local}"


def _sub(parent: ET.Element, ns: str, local: str, text: Optional[str] = None,
         attrib: Optional[dict] = None) -> ET.Element:
    el = ET.SubElement(parent, _q(ns, local), attrib or {})
    if text is not None:
        el.text = text
    return el


def _serialize(root: ET.Element) -> bytes:
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


def exception_report(code: str, locator: str, text: str) -> bytes:
    root = ET.Element(_q(OWS_NS, "ExceptionReport"), {"version": "1.2.0"})
    exc = _sub(root, OWS_NS, "Exception",
               attrib={"exceptionCode": code, "locator": locator})
    _sub(exc, OWS_NS, "ExceptionText", text)
    return _serialize(root)


def capabilities_xml(base_url: str) -> bytes:
    root = ET.Element(_q(CSW_NS, "Capabilities"), {"version": CSW_VERSION})
    ident = _sub(root, OWS_NS, "ServiceIdentification")
    _sub(ident, OWS_NS, "Title", "River basin dataset catalogue")
    _sub(ident, OWS_NS, "Abstract",
         "Discovery service for stations, time series, geodata and documents")
    _sub(ident, OWS_NS, "ServiceType", "CSW")
    _sub(ident, OWS_NS, "ServiceTypeVersion", CSW_VERSION)
    ops = _sub(root, OWS_NS, "OperationsMetadata")
    for name in OPERATIONS:
        op = _sub(ops, OWS_NS, "Operation", attrib={"name": name})
        dcp = _sub(op, OWS_NS, "DCP")
        http = _sub(dcp, OWS_NS, "HTTP")
        _sub(http, OWS_NS, "Get", attrib={_q(XLINK_NS, "href"): base_url})
    return _serialize(root)


def _record_element(parent: ET.Element, rec: MetadataRecord) -> None:
    el = _sub(parent, CSW_NS, "Record")
    _sub(el, DC_NS, "identifier", rec.identifier)
    _sub(el, DC_NS, "title", rec.title)
    _sub(el, DC_NS, "type", rec.rtype.value)
    _sub(el, DCT_NS, "abstract", rec.abstract)
    for kw in rec.keywords:
        _sub(el, DC_NS, "subject", kw)
    if rec.modified:
        _sub(el, DCT_NS, "modified", rec.modified)
    if rec.temporal_start and rec.temporal_end:
        _sub(el, DCT_NS, "temporal",
             f"{rec.temporal_start.isoformat()}/{rec.temporal_end.isoformat()}")
    if rec.bbox:
        minx, miny, maxx, maxy = rec.bbox
        box = _sub(el, OWS_NS, "BoundingBox")
        _sub(box, OWS_NS, "LowerCorner", f"{minx} {miny}")
        _sub(box, OWS_NS, "UpperCorner", f"{maxx} {maxy}")


def _status_timestamp(records: Sequence[MetadataRecord]) -> str:
    # Deterministic between writes: identical queries return identical bytes.
    stamps = [r.modified for r in records if r.modified]
    return max(stamps) if stamps else "1970-01-01T00:00:00Z"


def filter_records(records: Sequence[MetadataRecord], keyword: Optional[str],
                   rtype: Optional[RecordType]) -> list[MetadataRecord]:
    out = [r for r in records
           if (rtype is None or r.rtype is rtype)
           and (keyword is None or r.matches_keyword(keyword))]
    out.sort(key=lambda r: r.identifier)
    return out


def records_response_xml(all_visible: Sequence[MetadataRecord],
                         keyword: Optional[str], rtype: Optional[RecordType],
                         start_position: int, max_records: int) -> bytes:
    matched = filter_records(all_visible, keyword, rtype)
    page = matched[start_position - 1:start_position - 1 + max_records]
    next_record = start_position + len(page)
    if next_record > len(matched):
        next_record = 0
    root = ET.Element(_q(CSW_NS, "GetRecordsResponse"), {"version": CSW_VERSION})
    _sub(root, CSW_NS, "SearchStatus",
         attrib={"timestamp": _status_timestamp(all_visible)})
    results = _sub(root, CSW_NS, "SearchResults", attrib={
        "numberOfRecordsMatched": str(len(matched)),
        "numberOfRecordsReturned": str(len(page)),
        "nextRecord": str(next_record),
        "elementSet": "full",
    })
    for rec in page:
        _record_element(results, rec)
    return _serialize(root)


def record_by_id_xml(rec: MetadataRecord) -> bytes:
    root = ET.Element(_q(CSW_NS, "GetRecordByIdResponse"), {"version": CSW_VERSION})
    _record_element(root, rec)
    return _serialize(root)


def dispatch_csw(params: Mapping[str, str],
                 visible_records: Sequence[MetadataRecord],
                 base_url: str) -> bytes:
    """Route one KVP request; every outcome is an XML document.

    Parameter names are matched case-insensitively, as KVP clients vary.
    """
    kv = {k.lower(): v for k, v in params.items()}
    request = kv.get("request", "")
    if request not in OPERATIONS:
        return exception_report("OperationNotSupported", "request",
                                f"unknown request {request!r}")

    service = kv.get("service", "CSW" if request == "GetCapabilities" else None)
    if service != "CSW":
        return exception_report("InvalidParameterValue", "service",
                                f"service must be CSW, got {service!r}")

    version = kv.get("version") or kv.get("acceptversions")
    if request == "GetCapabilities":
        if version is not None and CSW_VERSION not in version.split(","):
            return exception_report("VersionNegotiationFailed", "version",
                                    f"only version {CSW_VERSION} is supported")
        return capabilities_xml(base_url)
    if version is not None and version != CSW_VERSION:
        return exception_report("InvalidParameterValue", "version",
                                f"only version {CSW_VERSION} is supported")

    if request == "GetRecordById":
        rid = kv.get("id", "")
        if not rid:
            return exception_report("MissingParameterValue", "id", "id is required")
        for rec in visible_records:
            if rec.identifier == rid:
                return record_by_id_xml(rec)
        return exception_report("InvalidParameterValue", "id",
                                f"no record with id {rid!r}")

    keyword = kv.get("q") or None
    raw_type = kv.get("type")
    constraint = kv.get("constraint")
    if constraint:
        # Tiny constraint language: "type=<enum>" or "keyword=<text>".
        name, sep, value = constraint.partition("=")
        key = name.strip().lower()
        if not sep or key not in ("type", "keyword", "q"):
            return exception_report("InvalidParameterValue", "constraint",
                                    f"unsupported constraint {constraint!r}")
        if key == "type":
            raw_type = value.strip()
        else:
            keyword = value.strip()
    rtype: Optional[RecordType] = None
    if raw_type:
        try:
            rtype = RecordType(raw_type)
        except ValueError:
            return exception_report("InvalidParameterValue", "type",
                                    f"unknown record type {raw_type!r}")
    try:
        start_position = int(kv.get("startposition", "1"))
        max_records = int(kv.get("maxrecords", "10"))
    except ValueError:
        return exception_report("InvalidParameterValue", "paging",
                                "startPosition and maxRecords must be integers")
    if start_position < 1:
        return exception_report("InvalidParameterValue", "startPosition",
                                "startPosition must be at least 1")
    if not 1 <= max_records <= MAX_RECORDS_LIMIT:
        return exception_report("InvalidParameterValue", "maxRecords",
                                f"maxRecords must lie in [1, {MAX_RECORDS_LIMIT}]")
    return records_response_xml(visible_records, keyword, rtype,
                                start_position, max_records)
