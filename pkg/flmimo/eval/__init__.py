"""Monte-Carlo trial scheduling and summaries for parameter sweeps."""
