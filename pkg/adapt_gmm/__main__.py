import sys

from adapt_gmm.cli.main import main


sys.exit(main())
