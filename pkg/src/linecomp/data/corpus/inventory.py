"""Simple inventory bookkeeping."""
import os
import json
from collections import defaultdict

DEFAULT_PATH = "inventory.json"
MAX_ITEMS = 1000


class Item(object):
    def __init__(self, name, price, quantity=0):
        self.name = name
        self.price = float(price)
        self.quantity = int(quantity)

    def total(self):
        return self.price * self.quantity

    def restock(self, amount):
        if amount <= 0:
            raise ValueError("amount must be positive")
        self.quantity += amount
        return self.quantity

    def to_dict(self):
        return {"name": self.name, "price": self.price, "quantity": self.quantity}


class Inventory(object):
    def __init__(self, path=DEFAULT_PATH):
        self.path = path
        self.items = {}
        self.history = []

    def add(self, item):
        if len(self.items) >= MAX_ITEMS:
            raise RuntimeError("inventory is full")
        self.items[item.name] = item
        self.history.append(("add", item.name))

    def remove(self, name):
        item = self.items.pop(name, None)
        if item is None:
            return False
        self.history.append(("remove", name))
        return True

    def value(self):
        total = 0.0
        for item in self.items.values():
            total += item.total()
        return total

    def low_stock(self, threshold=5):
        return [item for item in self.items.values() if item.quantity < threshold]

    def by_price(self):
        groups = defaultdict(list)
        for name, item in self.items.items():
            bucket = int(item.price // 10) * 10
            groups[bucket].append(name)
        return dict(groups)

    def save(self):
        data = [item.to_dict() for item in self.items.values()]
        with open(self.path, "w") as handle:
            json.dump(data, handle, indent=2)

    def load(self):
        if not os.path.exists(self.path):
            return 0
        with open(self.path) as handle:
            data = json.load(handle)
        for record in data:
            self.add(Item(record["name"], record["price"], record.get("quantity", 0)))
        return len(data)


def main():
    inv = Inventory()
    inv.add(Item("widget", 2.5, 10))
    inv.add(Item("gadget", 12.0, 3))
    print(inv.value())
    for item in inv.low_stock():
        print(item.name, item.quantity)
