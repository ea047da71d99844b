import sys
sys.exit(__import__("coagsens.cli", fromlist=["main"]).main())
