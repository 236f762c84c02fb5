"""One module per `segdepth` subcommand."""
