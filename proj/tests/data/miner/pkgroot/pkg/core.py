def process(data, strict=False):
    return data


def transform(data):
    return data


class Pipeline:
    def __init__(self, steps):
        self.steps = steps

    def run(self, data):
        return data
