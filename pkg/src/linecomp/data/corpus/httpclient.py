import time
import logging
import urllib.parse

logger = logging.getLogger(__name__)
RETRY_CODES = (500, 502, 503, 504)


class HttpError(Exception):
    def __init__(self, status, message):
        Exception.__init__(self, message)
        self.status = status


class Response(object):
    def __init__(self, status, headers, body):
        self.status = status
        self.headers = headers
        self.body = body

    def ok(self):
        return 200 <= self.status < 300

    def json(self):
        import json
        return json.loads(self.body)


class Client(object):
    def __init__(self, base_url, timeout=10, retries=3, transport=None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.transport = transport
        self.session_headers = {"User-Agent": "client/1.0"}

    def url(self, path, params=None):
        full = self.base_url + "/" + path.lstrip("/")
        if params:
            full = full + "?" + urllib.parse.urlencode(params)
        return full

    def request(self, method, path, params=None, body=None):
        url = self.url(path, params)
        attempt = 0
        delay = 0.5
        while True:
            attempt += 1
            try:
                response = self.transport(method, url, self.session_headers, body, self.timeout)
            except IOError as exc:
                logger.warning("request failed: %s", exc)
                if attempt >= self.retries:
                    raise
                time.sleep(delay)
                delay *= 2
                continue
            if response.status in RETRY_CODES and attempt < self.retries:
                time.sleep(delay)
                delay = delay * 2
                continue
            if not response.ok():
                raise HttpError(response.status, "bad status for " + url)
            return response

    def get(self, path, params=None):
        return self.request("GET", path, params=params)

    def post(self, path, body):
        return self.request("POST", path, body=body)

    def paginate(self, path, page_size=50):
        page = 1
        results = []
        while True:
            data = self.get(path, {"page": page, "size": page_size}).json()
            items = data.get("items", [])
            results.extend(items)
            if len(items) < page_size:
                break
            page += 1
        return results
