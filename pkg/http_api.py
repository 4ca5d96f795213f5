import json
import logging
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Dict, Tuple
from urllib.parse import parse_qs, urlparse

from errors import KEYWORD_ERRORS, MalformedWatermark, RecordNotFound, WatermarkError
from registry import CertifyingAuthority
from text_model import KeywordPolicy, normalize
from watermark_core import ComparisonMode, Watermark

logger = logging.getLogger(__name__)


class BadRequest(Exception):
    pass


def _status_for(error: WatermarkError) -> HTTPStatus:
    if isinstance(error, RecordNotFound):
        return HTTPStatus.NOT_FOUND
    if isinstance(error, KEYWORD_ERRORS):
        return HTTPStatus.UNPROCESSABLE_ENTITY
    if isinstance(error, MalformedWatermark):
        return HTTPStatus.BAD_REQUEST
    return HTTPStatus.INTERNAL_SERVER_ERROR


class CertifyingAuthorityHandler(BaseHTTPRequestHandler):
    """JSON facade over the registry: register, verify, search, resolve owners"""

    server_version = "ZeroWatermarkCA/1.0"

    @property
    def authority(self) -> CertifyingAuthority:
        return self.server.authority

    def log_message(self, format, *args):
        logger.info(f"{self.address_string()} {format % args}")

    def do_GET(self):
        url = urlparse(self.path)
        query = {key: values[-1] for key, values in parse_qs(url.query).items()}
        if url.path == "/health":
            self._send(HTTPStatus.OK, {"status": "ok", "records": len(self.authority)})
        elif url.path == "/records":
            records = self.authority.find(
                author=query.get("author"),
                keyword=query.get("keyword"),
                text_digest=query.get("digest"),
            )
            self._send(HTTPStatus.OK, [record.to_dict() for record in records])
        elif url.path == "/owner":
            if "digest" not in query:
                self._send_error(HTTPStatus.BAD_REQUEST, "BadRequest", "digest query parameter is required")
                return
            self._handle(lambda: (HTTPStatus.OK, self.authority.settle_dispute(query["digest"]).to_dict()))
        else:
            self._send_error(HTTPStatus.NOT_FOUND, "NotFound", f"No route for GET {url.path}")

    def do_POST(self):
        path = urlparse(self.path).path
        if path == "/records":
            self._handle(lambda: self._register(self._read_json()))
        elif path == "/verify":
            self._handle(lambda: self._verify(self._read_json()))
        else:
            self._send_error(HTTPStatus.NOT_FOUND, "NotFound", f"No route for POST {path}")

    def _register(self, body: Dict) -> Tuple[HTTPStatus, Dict]:
        author, text = body.get("author"), body.get("text")
        if not isinstance(author, str) or not isinstance(text, str):
            raise BadRequest("'author' and 'text' strings are required")
        raw_keyword = body.get("keyword")
        if raw_keyword is not None and not isinstance(raw_keyword, str):
            raise BadRequest("'keyword' must be a string")
        keyword = normalize(raw_keyword) if raw_keyword is not None else None
        policy = (
            KeywordPolicy.explicit(keyword, self.server.min_count)
            if raw_keyword is not None
            else KeywordPolicy.auto(self.server.min_count)
        )
        claimed = None
        if body.get("watermark") is not None:
            claimed = Watermark.from_dict(body["watermark"], keyword=keyword)
        record = self.authority.register(text, author, policy, claimed_watermark=claimed)
        return HTTPStatus.CREATED, record.to_dict()

    def _verify(self, body: Dict) -> Tuple[HTTPStatus, Dict]:
        text = body.get("text")
        if not isinstance(text, str):
            raise BadRequest("'text' string is required")
        try:
            mode = ComparisonMode.parse(body.get("mode", self.server.mode))
        except ValueError as e:
            raise BadRequest(str(e))

        if body.get("record_id"):
            result = self.authority.verify(text, record_id=body["record_id"], mode=mode)
        elif body.get("watermark") is not None:
            keyword = body.get("keyword")
            watermark = Watermark.from_dict(body["watermark"], keyword=normalize(keyword) if isinstance(keyword, str) else None)
            result = self.authority.verify(text, watermark=watermark, mode=mode)
        else:
            raise BadRequest("Either 'record_id' or 'keyword' and 'watermark' are required")
        return HTTPStatus.OK, result.to_dict()

    def _handle(self, action):
        try:
            status, payload = action()
        except BadRequest as e:
            self._send_error(HTTPStatus.BAD_REQUEST, "BadRequest", str(e))
        except WatermarkError as e:
            status = _status_for(e)
            if status is HTTPStatus.INTERNAL_SERVER_ERROR:
                logger.error(f"Request failed: {e}")
            self._send(status, e.to_dict())
        else:
            self._send(status, payload)

    def _read_json(self) -> Dict:
        try:
            length = int(self.headers.get("Content-Length") or 0)
        except ValueError:
            raise BadRequest("Content-Length must be an integer")
        if length < 0:
            raise BadRequest("Content-Length must not be negative")
        raw = self.rfile.read(length) if length else b""
        try:
            body = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise BadRequest(f"Request body is not valid JSON: {e}")
        if not isinstance(body, dict):
            raise BadRequest("Request body must be a JSON object")
        return body

    def _send_error(self, status: HTTPStatus, code: str, detail: str):
        self._send(status, {"error": code, "detail": detail})

    def _send(self, status: HTTPStatus, payload):
        data = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


def create_server(
    authority: CertifyingAuthority,
    host: str = "127.0.0.1",
    port: int = 8080,
    mode=ComparisonMode.POSITIONAL_SYMBOL,
    min_count: int = 1,
) -> ThreadingHTTPServer:
    """Bind the facade; port 0 picks a free port"""
    server = ThreadingHTTPServer((host, port), CertifyingAuthorityHandler)
    server.authority = authority
    server.mode = ComparisonMode.parse(mode)
    server.min_count = min_count
    return server


def serve(authority: CertifyingAuthority, host: str, port: int, mode=ComparisonMode.POSITIONAL_SYMBOL, min_count: int = 1):
    server = create_server(authority, host, port, mode, min_count)
    logger.info(f"Certifying authority listening on http://{host}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        logger.info("Shutting down")
    finally:
        server.server_close()
