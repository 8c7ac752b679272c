import os

TRUE_VALUES = ("1", "true", "yes", "on")


class ConfigError(Exception):
    pass


class Config(object):
    def __init__(self, defaults=None):
        self.values = dict(defaults or {})
        self.sources = []

    def __getitem__(self, key):
        if key not in self.values:
            raise KeyError(key)
        return self.values[key]

    def __contains__(self, key):
        return key in self.values

    def get(self, key, default=None):
        return self.values.get(key, default)

    def get_bool(self, key, default=False):
        value = self.values.get(key)
        if value is None:
            return default
        return str(value).lower() in TRUE_VALUES

    def get_int(self, key, default=0):
        try:
            return int(self.values[key])
        except KeyError:
            return default
        except ValueError:
            raise ConfigError("not an integer: " + key)

    def load_file(self, path):
        count = 0
        with open(path) as handle:
            for raw in handle:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError("bad line: " + line)
                key, value = line.split("=", 1)
                self.values[key.strip()] = value.strip()
                count += 1
        self.sources.append(path)
        return count

    def load_env(self, prefix="APP_"):
        for key, value in os.environ.items():
            if key.startswith(prefix):
                name = key[len(prefix):].lower()
                self.values[name] = value
        self.sources.append("env")

    def merge(self, other):
        merged = Config(self.values)
        merged.values.update(other.values)
        merged.sources = self.sources + other.sources
        return merged

    def dump(self):
        lines = []
        for key in sorted(self.values):
            lines.append("%s = %s" % (key, self.values[key]))
        return "\n".join(lines)


def from_sources(paths, env=True):
    config = Config()
    for path in paths:
        if os.path.isfile(path):
            config.load_file(path)
    if env:
        config.load_env()
    return config
