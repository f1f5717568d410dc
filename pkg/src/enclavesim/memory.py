"""Backing main memory: sparse, zero-initialized, page-chunked byte store."""

_PAGE = 4096


class SparseMemory:
    def __init__(self, size):
        if size <= 0:
            raise ValueError("memory size must be positive")
        self.size = size
        self._pages = {}  # page number -> bytearray(_PAGE)

    def _page_for(self, number, create):
        page = self._pages.get(number)
        if page is None and create:
            page = bytearray(_PAGE)
            self._pages[number] = page
        return page

    def check_range(self, address, size):
        return 0 <= address and address + size <= self.size

    def read(self, address, size):
        if not self.check_range(address, size):
            raise IndexError(f"read outside memory: {address:#x}+{size}")
        out = bytearray(size)
        pos = 0
        while pos < size:
            addr = address + pos
            number, offset = divmod(addr, _PAGE)
            chunk = min(size - pos, _PAGE - offset)
            page = self._pages.get(number)
            if page is not None:
                out[pos:pos + chunk] = page[offset:offset + chunk]
            pos += chunk
        return bytes(out)

    def write(self, address, data):
        size = len(data)
        if not self.check_range(address, size):
            raise IndexError(f"write outside memory: {address:#x}+{size}")
        pos = 0
        while pos < size:
            addr = address + pos
            number, offset = divmod(addr, _PAGE)
            chunk = min(size - pos, _PAGE - offset)
            page = self._page_for(number, create=True)
            page[offset:offset + chunk] = data[pos:pos + chunk]
            pos += chunk

    def zero(self, address, size):
        """Zero a range without materializing untouched pages."""
        if not self.check_range(address, size):
            raise IndexError(f"zero outside memory: {address:#x}+{size}")
        pos = 0
        while pos < size:
            addr = address + pos
            number, offset = divmod(addr, _PAGE)
            chunk = min(size - pos, _PAGE - offset)
            page = self._pages.get(number)
            if page is not None:
                page[offset:offset + chunk] = bytes(chunk)
            pos += chunk

    def is_zero(self, address, size):
        return self.read(address, size) == bytes(size)
