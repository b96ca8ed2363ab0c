# Response models package

