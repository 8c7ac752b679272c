import math

EPSILON = 1e-9


class Vector(object):
    def __init__(self, x=0.0, y=0.0):
        self.x = x
        self.y = y

    def __add__(self, other):
        return Vector(self.x + other.x, self.y + other.y)

    def __sub__(self, other):
        return Vector(self.x - other.x, self.y - other.y)

    def __mul__(self, k):
        return Vector(self.x * k, self.y * k)

    def dot(self, other):
        return self.x * other.x + self.y * other.y

    def cross(self, other):
        return self.x * other.y - self.y * other.x

    def norm(self):
        return math.sqrt(self.x ** 2 + self.y ** 2)

    def unit(self):
        n = self.norm()
        if n < EPSILON:
            raise ZeroDivisionError("zero vector has no direction")
        return Vector(self.x / n, self.y / n)

    def angle(self):
        return math.atan2(self.y, self.x)

    def __eq__(self, other):
        return abs(self.x - other.x) < EPSILON and abs(self.y - other.y) < EPSILON

    def __repr__(self):
        return "Vector(%r, %r)" % (self.x, self.y)


def polygon_area(points):
    n = len(points)
    if n < 3:
        return 0.0
    area = 0.0
    for i in range(n):
        j = (i + 1) % n
        area += points[i].cross(points[j])
    return abs(area) / 2.0


def centroid(points):
    sx = sum([p.x for p in points])
    sy = sum([p.y for p in points])
    return Vector(sx / len(points), sy / len(points))


def convex_hull(points):
    pts = sorted(points, key=point_key)
    if len(pts) <= 2:
        return pts
    lower = []
    for p in pts:
        while len(lower) >= 2 and (lower[-1] - lower[-2]).cross(p - lower[-2]) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and (upper[-1] - upper[-2]).cross(p - upper[-2]) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def point_key(p):
    return (p.x, p.y)


def distance(a, b):
    return (a - b).norm()


def closest_pair(points):
    best = None
    best_dist = float("inf")
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            d = distance(points[i], points[j])
            if d < best_dist:
                best_dist = d
                best = (points[i], points[j])
    return best, best_dist
