"""Services: models, training, evaluation, theory checks, reports and experiment runs."""
