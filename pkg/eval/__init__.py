# evaluation studies run against the ddrom pipeline
